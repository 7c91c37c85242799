"""End-to-end runs of the camel-lab command line interface."""

import json
import os

import numpy as np
import pytest

import camel_lab as cl
from camel_lab.cli import main


def _only_dir(base):
    entries = [os.path.join(base, d) for d in os.listdir(base)]
    dirs = [e for e in entries if os.path.isdir(e)]
    assert len(dirs) == 1
    return dirs[0]


def _dirs(base):
    return sorted(
        os.path.join(base, d)
        for d in os.listdir(base)
        if os.path.isdir(os.path.join(base, d))
    )


class TestCapacity:
    def test_ball_prints_pi(self, tmp_path, capsys):
        code = main(["capacity", "--shape", "ball", "--r", "1", "--out", str(tmp_path)])
        assert code == 0
        out = capsys.readouterr().out
        assert "3.14159" in out

    def test_table_outputs(self, tmp_path):
        code = main(["capacity", "--out", str(tmp_path)])
        assert code == 0
        outdir = _only_dir(tmp_path)
        csv_path = os.path.join(outdir, "capacity.csv")
        with open(csv_path) as fh:
            lines = fh.read().splitlines()
        assert lines[0] == "# subcommand=capacity"
        assert lines[1].startswith("# config_hash=")
        data = [ln for ln in lines if ln and not ln.startswith("#")]
        assert data[0].startswith("shape,")
        assert len(data) - 1 >= 9
        assert os.path.exists(os.path.join(outdir, "metadata.json"))

    def test_metadata_contents(self, tmp_path):
        main(["capacity", "--out", str(tmp_path)])
        outdir = _only_dir(tmp_path)
        with open(os.path.join(outdir, "metadata.json")) as fh:
            meta = json.load(fh)
        assert meta["subcommand"] == "capacity"
        assert meta["version"] == cl.__version__
        assert "config" in meta and "config_hash" in meta


class TestSimulate:
    def test_zero_spec_final_equals_linear(self, tmp_path):
        code = main([
            "simulate", "--spec", "zero", "--n", "4", "--m", "32", "--t", "1.0",
            "--seed", "3", "--out", str(tmp_path),
        ])
        assert code == 0
        outdir = _only_dir(tmp_path)
        traj, meta = cl.load_trajectory(os.path.join(outdir, "trajectory.csv"))
        first, last = traj.states[0], traj.states[-1]
        assert cl.e_norm(last - cl.apply_exp_tJA(first, 1.0)) < 1e-10
        final = cl.load_state(os.path.join(outdir, "final_state.csv"))
        assert cl.e_norm(final - last) == 0.0

    def test_initial_state_from_file(self, tmp_path):
        state_path = tmp_path / "u0.csv"
        cl.save_state(cl.make_state(4, {1: 0.5}), state_path)
        out = tmp_path / "runs"
        code = main([
            "simulate", "--spec", "sine-gordon", "--n", "4", "--m", "32",
            "--t", "0.5", "--state", str(state_path), "--out", str(out),
        ])
        assert code == 0
        traj, _ = cl.load_trajectory(os.path.join(_only_dir(out), "trajectory.csv"))
        assert traj.states[0].coeff(1, "a") == 0.5

    def test_divergent_state_exits_2(self, tmp_path):
        state_path = tmp_path / "huge.csv"
        cl.save_state(cl.make_state(4, {0: 1e9}), state_path)
        out = tmp_path / "runs"
        code = main([
            "simulate", "--spec", "sine-gordon", "--n", "4", "--m", "32",
            "--t", "0.5", "--state", str(state_path), "--out", str(out),
        ])
        assert code == 2


class TestDeterminism:
    def test_repeat_runs_bit_identical(self, tmp_path):
        args = [
            "simulate", "--spec", "sine-gordon", "--n", "4", "--m", "32",
            "--t", "0.5", "--seed", "11", "--out", str(tmp_path),
        ]
        assert main(args) == 0
        assert main(args) == 0
        d1, d2 = _dirs(tmp_path)[:2]
        for name in ("trajectory.csv", "final_state.csv", "metadata.json"):
            with open(os.path.join(d1, name), "rb") as fh:
                b1 = fh.read()
            with open(os.path.join(d2, name), "rb") as fh:
                b2 = fh.read()
            assert b1 == b2, f"{name} differs between identical runs"

    def test_same_second_runs_get_distinct_dirs(self, tmp_path):
        args = ["capacity", "--out", str(tmp_path)]
        assert main(args) == 0
        assert main(args) == 0
        assert len(_dirs(tmp_path)) == 2


class TestConfigResolution:
    def test_flags_override_config(self, tmp_path, capsys):
        cfg = tmp_path / "run.toml"
        cfg.write_text('[capacity]\nshape = "ball"\nr = 2.0\n')
        code = main([
            "capacity", "--config", str(cfg), "--r", "1", "--out", str(tmp_path / "o"),
        ])
        assert code == 0
        assert "3.14159" in capsys.readouterr().out

    def test_config_without_flags(self, tmp_path, capsys):
        cfg = tmp_path / "run.toml"
        cfg.write_text('[capacity]\nshape = "ball"\nr = 2.0\n')
        code = main(["capacity", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert code == 0
        assert "12.56637" in capsys.readouterr().out  # 4 pi

    def test_flat_keys_lenient(self, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text('seed = 5\nshape = "ball"\nr = 1.0\n')
        code = main(["capacity", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert code == 0

    def test_unknown_table_key_rejected(self, tmp_path):
        cfg = tmp_path / "run.toml"
        cfg.write_text("[capacity]\nbogus = 1\n")
        code = main(["capacity", "--config", str(cfg), "--out", str(tmp_path / "o")])
        assert code == 1

    def test_missing_config_file(self, tmp_path):
        code = main([
            "capacity", "--config", str(tmp_path / "none.toml"),
            "--out", str(tmp_path / "o"),
        ])
        assert code == 1


class TestUsageErrors:
    def test_unknown_subcommand_exits_1(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate", "--out", str(tmp_path)])
        assert exc.value.code == 1

    def test_bad_flag_value_exits_1(self, tmp_path):
        with pytest.raises(SystemExit) as exc:
            main(["capacity", "--r", "one", "--out", str(tmp_path)])
        assert exc.value.code == 1

    def test_unknown_shape_exits_1(self, tmp_path):
        code = main(["capacity", "--shape", "egg", "--out", str(tmp_path)])
        assert code == 1


class TestConverge:
    def test_small_run(self, tmp_path):
        code = main([
            "converge", "--spec", "sine-gordon", "--R", "1.0", "--T", "0.5",
            "--n-values", "2,4,8", "--samples", "5", "--N-probe", "16",
            "--m", "64", "--flow-t", "0.3", "--flow-samples", "2",
            "--out", str(tmp_path),
        ])
        assert code == 0
        outdir = _only_dir(tmp_path)
        assert os.path.exists(os.path.join(outdir, "epsilon.csv"))
        assert os.path.exists(os.path.join(outdir, "approx.csv"))
        rep = cl.load_report(os.path.join(outdir, "epsilon.csv"))
        assert rep.n_values == (2, 4, 8)

    def test_zero_spec_flat_curve_allowed(self, tmp_path):
        code = main([
            "converge", "--spec", "zero", "--R", "1.0", "--T", "0.5",
            "--n-values", "2,4", "--samples", "3", "--N-probe", "8",
            "--m", "64", "--flow-t", "0.2", "--flow-samples", "2",
            "--out", str(tmp_path),
        ])
        assert code == 0


class TestCamelCommand:
    def test_small_run_passes(self, tmp_path):
        code = main([
            "camel", "--system", "coupled-oscillator", "--t", "0.2",
            "--multistart", "6", "--out", str(tmp_path),
        ])
        assert code == 0
        outdir = _only_dir(tmp_path)
        with open(os.path.join(outdir, "summary.json")) as fh:
            summary = json.load(fh)
        assert summary["passed"] is True
        assert summary["found"] > 0
        assert summary["max_norm"] <= summary["bound"]
        with open(os.path.join(outdir, "camel_points.csv")) as fh:
            rows = [
                ln for ln in fh.read().splitlines() if ln and not ln.startswith("#")
            ]
        assert len(rows) - 1 == summary["found"]

    def test_unknown_system_exits_1(self, tmp_path):
        code = main(["camel", "--system", "pendulum", "--out", str(tmp_path)])
        assert code == 1


class TestModes:
    def test_small_run(self, tmp_path):
        code = main([
            "modes", "--spec", "zero", "--l", "1", "--k", "1", "--n", "2",
            "--m", "16", "--t", "0.3", "--dt", "0.05", "--budget", "2",
            "--out", str(tmp_path),
        ])
        assert code == 0
        outdir = _only_dir(tmp_path)
        best = cl.load_state(os.path.join(outdir, "best_state.csv"))
        assert best.n == 2
        with open(os.path.join(outdir, "modes.csv")) as fh:
            rows = [
                ln for ln in fh.read().splitlines() if ln and not ln.startswith("#")
            ]
        assert len(rows) - 1 == 2  # one row per start
        with open(os.path.join(outdir, "metadata.json")) as fh:
            meta = json.load(fh)
        assert meta["best_value"] > 0.9
        assert meta["reduced_ball_radius"] > 0.0


class TestDisplace:
    def test_small_run(self, tmp_path):
        code = main(["displace", "--samples", "500", "--out", str(tmp_path)])
        assert code == 0
        with open(os.path.join(_only_dir(tmp_path), "summary.json")) as fh:
            summary = json.load(fh)
        assert summary["violations"] == 0
        assert summary["energy_bound"] == 2.0


class TestAlgebra:
    def test_small_run(self, tmp_path):
        code = main([
            "algebra", "--t", "0.2", "--points", "3", "--out", str(tmp_path),
        ])
        assert code == 0
        with open(os.path.join(_only_dir(tmp_path), "summary.json")) as fh:
            summary = json.load(fh)
        assert summary["composition_error"] < 1e-6
        assert summary["inverse_error"] < 1e-6
