"""Per-mode linear blocks: group law, ODE oracle, norms, and state maps."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

import camel_lab as cl


class TestLambda:
    def test_values(self):
        assert cl.lam(0) == 1.0
        assert cl.lam(1) == pytest.approx(np.sqrt(2.0))
        assert cl.lam(-3) == cl.lam(3)

    def test_weights_match(self):
        np.testing.assert_allclose(
            cl.lambda_weights(4), [cl.lam(j) for j in range(-4, 5)]
        )


class TestExpBlock:
    def test_identity_at_t0(self):
        for j in (-7, 0, 1, 12):
            np.testing.assert_allclose(cl.exp_block(j, 0.0).matrix(), np.eye(2))

    def test_unit_determinant(self):
        for j in (-5, 0, 1, 3, 40):
            for t in (-2.0, 0.3, 7.7):
                assert cl.exp_block(j, t).det() == pytest.approx(1.0, abs=1e-13)

    def test_j0_is_shear(self):
        m = cl.exp_block(0, 1.7).matrix()
        np.testing.assert_allclose(m, [[1.0, 1.7], [0.0, 1.0]])

    @given(
        st.integers(-20, 20),
        st.floats(-3, 3, allow_nan=False),
        st.floats(-3, 3, allow_nan=False),
    )
    @settings(max_examples=40, deadline=None)
    def test_group_law(self, j, s, t):
        lhs = cl.exp_block(j, s + t).matrix()
        rhs = cl.exp_block(j, s).matrix() @ cl.exp_block(j, t).matrix()
        np.testing.assert_allclose(lhs, rhs, atol=1e-11)

    def test_even_in_j(self):
        for j in (1, 4, 19):
            np.testing.assert_allclose(
                cl.exp_block(j, 0.9).matrix(), cl.exp_block(-j, 0.9).matrix()
            )

    def test_ode_oracle_small(self):
        # d/dt (a, b) = (lam*b, -(lam - 1/lam)*a), fundamental matrix columns
        for j in (1, 3, -5, 0):
            lamj = cl.lam(j)
            kap = lamj - 1.0 / lamj

            def rhs(t, y):
                return [lamj * y[1], -kap * y[0]]

            for t_end in (0.4, -1.3):
                cols = []
                for e in (np.array([1.0, 0.0]), np.array([0.0, 1.0])):
                    sol = solve_ivp(
                        rhs, (0.0, t_end), e, method="DOP853",
                        rtol=1e-12, atol=1e-14, t_eval=[t_end],
                    )
                    cols.append(sol.y[:, -1])
                oracle = np.column_stack(cols)
                np.testing.assert_allclose(
                    cl.exp_block(j, t_end).matrix(), oracle, atol=1e-11
                )


class TestStateMaps:
    def test_apply_exp_acts_blockwise(self):
        n = 5
        u = cl.sample_states(n, 2.0, 1, np.random.default_rng(0))[0]
        t = 0.8
        v = cl.apply_exp_tJA(u, t)
        for j in range(-n, n + 1):
            blk = cl.exp_block(j, t).matrix()
            pair = blk @ np.array([u.coeff(j, "a"), u.coeff(j, "b")])
            assert v.coeff(j, "a") == pytest.approx(pair[0], abs=1e-13)
            assert v.coeff(j, "b") == pytest.approx(pair[1], abs=1e-13)

    def test_apply_exp_inverse(self):
        u = cl.sample_states(6, 1.0, 1, np.random.default_rng(1))[0]
        v = cl.apply_exp_tJA(cl.apply_exp_tJA(u, 1.3), -1.3)
        assert cl.e_norm(v - u) < 1e-12

    def test_apply_exp_preserves_symplectic_form(self):
        rng = np.random.default_rng(2)
        xi, eta = cl.sample_states(5, 1.0, 2, rng)
        before = cl.symplectic_form(xi, eta)
        after = cl.symplectic_form(
            cl.apply_exp_tJA(xi, 0.7), cl.apply_exp_tJA(eta, 0.7)
        )
        assert after == pytest.approx(before, abs=1e-12)

    def test_array_path_matches_wrapper(self):
        u = cl.sample_states(4, 1.0, 1, np.random.default_rng(3))[0]
        a, b = cl.apply_exp_tJA_arrays(u.a, u.b, 0.6)
        v = cl.apply_exp_tJA(u, 0.6)
        np.testing.assert_allclose(a, v.a, atol=1e-15)
        np.testing.assert_allclose(b, v.b, atol=1e-15)

    def test_apply_J_squares_to_minus_identity(self):
        u = cl.sample_states(4, 1.0, 1, np.random.default_rng(4))[0]
        w = cl.apply_J(cl.apply_J(u))
        assert cl.e_norm(w + u) < 1e-14

    def test_apply_J_gives_symplectic_form(self):
        # omega(xi, eta) equals the E-inner product of J xi with... the pairing
        # convention: omega(xi, eta) = <a_xi, b_eta> - <b_xi, a_eta>
        rng = np.random.default_rng(5)
        xi, eta = cl.sample_states(4, 1.0, 2, rng)
        jxi = cl.apply_J(xi)
        ip = float(np.dot(jxi.a, eta.a) + np.dot(jxi.b, eta.b))
        assert ip == pytest.approx(-cl.symplectic_form(xi, eta), abs=1e-12)


class TestGroupNormBound:
    def test_dominates_block_norms(self):
        t, n_max = 1.0, 16
        bound = cl.group_norm_bound(t, n_max)
        for j in range(-n_max, n_max + 1):
            sv = np.linalg.svd(cl.exp_block(j, t).matrix(), compute_uv=False)[0]
            assert sv <= bound + 1e-12

    def test_attained(self):
        t, n_max = 0.7, 8
        bound = cl.group_norm_bound(t, n_max)
        best = max(
            np.linalg.svd(cl.exp_block(j, t).matrix(), compute_uv=False)[0]
            for j in range(-n_max, n_max + 1)
        )
        assert bound == pytest.approx(best, rel=1e-12)

    def test_at_least_one(self):
        assert cl.group_norm_bound(0.0, 4) >= 1.0
        assert cl.group_norm_bound(2.0, 1) >= 1.0
