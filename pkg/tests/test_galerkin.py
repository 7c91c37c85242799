"""Truncation-convergence studies and isotonic smoothing."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import camel_lab as cl


class TestIsotonic:
    def test_simple_pooling(self):
        np.testing.assert_allclose(
            cl.isotonic_decreasing([3.0, 1.0, 2.0, 0.0]), [3.0, 1.5, 1.5, 0.0]
        )

    def test_increasing_input_pools_to_mean(self):
        np.testing.assert_allclose(
            cl.isotonic_decreasing([1.0, 2.0, 3.0]), [2.0, 2.0, 2.0]
        )

    def test_already_decreasing_unchanged(self):
        vals = [5.0, 3.0, 1.0, 0.5]
        np.testing.assert_allclose(cl.isotonic_decreasing(vals), vals)

    def test_single_value(self):
        np.testing.assert_allclose(cl.isotonic_decreasing([7.0]), [7.0])

    @given(st.lists(st.floats(0, 100, allow_nan=False), min_size=1, max_size=20))
    @settings(max_examples=50, deadline=None)
    def test_output_non_increasing_and_mean_preserving(self, vals):
        out = cl.isotonic_decreasing(vals)
        assert len(out) == len(vals)
        assert np.all(np.diff(out) <= 1e-12)
        assert np.mean(out) == pytest.approx(np.mean(vals), abs=1e-9)
        assert out.min() >= min(vals) - 1e-12
        assert out.max() <= max(vals) + 1e-12


class TestSampling:
    def test_ball_coeffs_shapes_and_norms(self):
        rng = np.random.default_rng(0)
        a, b = cl.sample_ball_coeffs(8, 2.0, 50, rng)
        assert a.shape == (50, 17) and b.shape == (50, 17)
        norms = np.sqrt(np.sum(a**2 + b**2, axis=-1))
        assert np.all(norms <= 2.0 + 1e-12)
        assert norms.max() > 1.0  # fills the ball, not just the center

    def test_deterministic_under_seed(self):
        a1, b1 = cl.sample_ball_coeffs(4, 1.0, 10, np.random.default_rng(7))
        a2, b2 = cl.sample_ball_coeffs(4, 1.0, 10, np.random.default_rng(7))
        np.testing.assert_array_equal(a1, a2)
        np.testing.assert_array_equal(b1, b2)

    def test_sample_states_wraps(self):
        states = cl.sample_states(5, 1.5, 3, np.random.default_rng(1))
        assert len(states) == 3
        assert all(s.n == 5 for s in states)
        assert all(cl.e_norm(s) <= 1.5 + 1e-12 for s in states)


class TestEpsilonCurve:
    def test_zero_spec_gives_zero_curve(self):
        rep = cl.epsilon_curve(
            cl.zero_nonlinearity(), R=1.0, T=1.0, n_values=(2, 4),
            samples=5, seed=0, N_probe=8, m=64,
        )
        assert rep.raw_errors == (0.0, 0.0)
        assert rep.isotonic_errors == (0.0, 0.0)

    def test_sine_gordon_curve_decreases(self):
        rep = cl.epsilon_curve(
            cl.sine_gordon(), R=1.5, T=1.0, n_values=(2, 4, 8, 16),
            samples=20, seed=3, N_probe=32, m=128,
        )
        iso = rep.isotonic_errors
        assert all(x >= y for x, y in zip(iso, iso[1:]))
        assert iso[-1] < iso[0]

    def test_validation(self):
        sg = cl.sine_gordon()
        with pytest.raises(ValueError):
            cl.epsilon_curve(sg, 1.0, 1.0, (4, 4), 5, 0, 16, 64)
        with pytest.raises(ValueError):
            cl.epsilon_curve(sg, 1.0, 1.0, (4, 8), 5, 0, 8, 64)
        with pytest.raises(ValueError):
            cl.epsilon_curve(sg, -1.0, 1.0, (2, 4), 5, 0, 16, 64)

    def test_report_round_trip(self, tmp_path):
        rep = cl.epsilon_curve(
            cl.sine_gordon(), R=1.0, T=0.5, n_values=(2, 4),
            samples=4, seed=1, N_probe=8, m=64,
        )
        path = tmp_path / "report.csv"
        cl.save_report(rep, path)
        back = cl.load_report(path)
        assert back.n_values == rep.n_values
        np.testing.assert_allclose(back.raw_errors, rep.raw_errors)
        np.testing.assert_allclose(back.isotonic_errors, rep.isotonic_errors)
        assert back.R == rep.R and back.T == rep.T
        assert back.samples == rep.samples and back.seed == rep.seed

    def test_report_validation(self):
        with pytest.raises(ValueError):
            cl.ConvergenceReport(
                R=1.0, T=1.0, n_values=(2, 4), raw_errors=(1.0,),
                isotonic_errors=(1.0, 0.5), samples=3, seed=0, N_probe=8, m=64,
            )
        with pytest.raises(ValueError):
            cl.ConvergenceReport(
                R=1.0, T=1.0, n_values=(2, 4), raw_errors=(1.0, -0.5),
                isotonic_errors=(1.0, 0.5), samples=3, seed=0, N_probe=8, m=64,
            )


class TestApproxError:
    def test_zero_at_reference_order(self):
        err = cl.approx_error(
            cl.sine_gordon(), t=0.5, n=8, N_ref=8, R=1.0, samples=4, seed=0,
            cfg=cl.FlowConfig(dt=1e-2, n=8, m=64),
        )
        assert err == 0.0

    def test_decreasing_in_n(self):
        sg = cl.sine_gordon()
        cfg = cl.FlowConfig(dt=1e-2, n=4, m=128)
        errs = [
            cl.approx_error(sg, t=0.5, n=n, N_ref=16, R=1.5, samples=6, seed=2, cfg=cfg)
            for n in (2, 4, 8)
        ]
        assert errs[0] > errs[1] > errs[2]
        assert errs[2] < 1e-2

    def test_zero_spec_error_is_zero(self):
        err = cl.approx_error(
            cl.zero_nonlinearity(), t=1.0, n=2, N_ref=8, R=1.0, samples=4, seed=0,
            cfg=cl.FlowConfig(dt=1e-2, n=2, m=64),
        )
        assert err < 1e-13

    def test_validation(self):
        with pytest.raises(ValueError):
            cl.approx_error(
                cl.sine_gordon(), t=0.5, n=8, N_ref=4, R=1.0, samples=2, seed=0,
                cfg=cl.FlowConfig(dt=1e-2, n=8, m=64),
            )
