"""Batch experiment runner: `camel-lab <subcommand> [flags]`.

Configuration comes from an optional TOML file (top-level keys apply to every
subcommand, a [subcommand] table overrides them) with command-line flags
winning over both.  Each run owns a fresh output directory named by a UTC
timestamp plus a hash of the resolved configuration; file contents depend
only on the configuration and seed, never on the clock, so reruns are
bit-identical.  Exit codes: 0 success, 1 invalid configuration, 2 property
violation.  The environment variable CAMEL_LAB_THREADS caps parallel workers.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import __version__
from .camel import (
    BallBase,
    CoisotropicCylinder,
    camel_bound_check,
    camel_fiber_bound,
    capacity_oracle,
    capacity_table,
    coupled_oscillator,
    displacement_demo,
    find_camel_points,
    harmonic_oscillator,
    maximize_mode,
    min_enclosing_ball,
    reduce_points,
    verify_composition,
    verify_inverse,
)
from .galerkin import approx_error, epsilon_curve, sample_states, save_report
from .integrators import FlowConfig, FlowDivergenceError, flow, flow_map, save_trajectory
from .nonlinearity import get_spec
from .phase_space import e_norm, load_state, save_state

_DEFAULTS = {
    "simulate": {
        "spec": "sine-gordon",
        "n": 8,
        "m": 64,
        "dt": 1e-2,
        "t": 1.0,
        "scheme": "strang",
        "seed": 0,
        "state": "",
        "radius": 1.0,
    },
    "converge": {
        "spec": "sine-gordon",
        "R": 1.0,
        "T": 1.0,
        "n_values": "4,8,16,32,64",
        "samples": 50,
        "seed": 0,
        "N_probe": 128,
        "m": 512,
        "flow_t": 1.0,
        "flow_samples": 10,
        "dt": 1e-2,
    },
    "camel": {
        "system": "coupled-oscillator",
        "r": 1.0,
        "t": 0.2,
        "tol": 1e-8,
        "multistart": 64,
        "seed": 0,
        "fiber_box": 0.0,
        "dt": 1e-3,
        "bound_tol": 1e-2,
    },
    "modes": {
        "spec": "sine-gordon",
        "l": 1,
        "k": 1,
        "r": 1.0,
        "t": 1.0,
        "n": 16,
        "m": 128,
        "dt": 1e-2,
        "scheme": "strang",
        "budget": 64,
        "seed": 0,
        "fiber_box": 1.0,
    },
    "capacity": {"shape": "", "r": 1.0, "n": 2, "m": 1, "k": 1},
    "displace": {
        "samples": 100_000,
        "seed": 0,
        "dim": 2,
        "q_box": 3.0,
        "p_box": 1.0,
    },
    "algebra": {
        "t": 0.5,
        "points": 20,
        "dt": 1e-3,
        "inner_dt": 1e-2,
        "seed": 0,
        "tol": 1e-5,
    },
}

_SYSTEMS = {
    "coupled-oscillator": coupled_oscillator,
    "harmonic": harmonic_oscillator,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # Map argparse usage errors onto exit code 1; 2 is reserved for
    # property violations.
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def build_parser() -> _Parser:
    parser = _Parser(
        prog="camel-lab",
        description="Spectral string-equation simulator and rigidity toolkit.",
        epilog="CAMEL_LAB_THREADS caps parallel workers.",
    )
    parser.add_argument("--config", default="", help="TOML configuration file")
    parser.add_argument("--out", default="runs", help="base output directory")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, help_text, flags):
        p = sub.add_parser(name, help=help_text)
        # SUPPRESS keeps a subcommand-position flag from clobbering the
        # top-level value with None.
        p.add_argument("--config", default=argparse.SUPPRESS,
                       help="TOML configuration file")
        p.add_argument("--out", default=argparse.SUPPRESS,
                       help="base output directory")
        for flag, kind in flags:
            p.add_argument(f"--{flag.replace('_', '-')}", dest=flag, type=kind,
                           default=None)
        return p

    add(
        "simulate",
        "integrate the string equation and store the trajectory",
        [("spec", str), ("n", int), ("m", int), ("dt", float), ("t", float),
         ("scheme", str), ("seed", int), ("state", str), ("radius", float)],
    )
    add(
        "converge",
        "gradient-truncation curve and flow-approximation errors",
        [("spec", str), ("R", float), ("T", float), ("n_values", str),
         ("samples", int), ("seed", int), ("N_probe", int), ("m", int),
         ("flow_t", float), ("flow_samples", int), ("dt", float)],
    )
    add(
        "camel",
        "find camel points, reduce them, and check the certified bound",
        [("system", str), ("r", float), ("t", float), ("tol", float),
         ("multistart", int), ("seed", int), ("fiber_box", float),
         ("dt", float), ("bound_tol", float)],
    )
    add(
        "modes",
        "maximize a mode amplitude over cylinder-type initial data",
        [("spec", str), ("l", int), ("k", int), ("r", float), ("t", float),
         ("n", int), ("m", int), ("dt", float), ("scheme", str),
         ("budget", int), ("seed", int), ("fiber_box", float)],
    )
    add(
        "capacity",
        "closed-form capacity oracle values",
        [("shape", str), ("r", float), ("n", int), ("m", int), ("k", int)],
    )
    add(
        "displace",
        "displacement of the slab V by the profile flow",
        [("samples", int), ("seed", int), ("dim", int), ("q_box", float),
         ("p_box", float)],
    )
    add(
        "algebra",
        "composition and inversion identities for Hamiltonian flows",
        [("t", float), ("points", int), ("dt", float), ("inner_dt", float),
         ("seed", int), ("tol", float)],
    )
    return parser


def _resolve(sub: str, args: argparse.Namespace) -> dict:
    """Defaults, then the TOML file, then explicit flags."""
    cfg = dict(_DEFAULTS[sub])
    path = args.config
    if path:
        if not os.path.isfile(path):
            raise UsageError(f"config file not found: {path}")
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
        # Flat keys apply wherever the subcommand knows them; the
        # [subcommand] table is validated strictly and wins over them.
        for key, val in data.items():
            if not isinstance(val, dict) and key in cfg:
                cfg[key] = val
        for key, val in data.get(sub, {}).items():
            if key in ("out", "config"):
                continue
            if key not in cfg:
                raise UsageError(f"unknown configuration key {key!r} for {sub}")
            cfg[key] = val
    for key in cfg:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    return cfg


def _config_hash(sub: str, cfg: dict) -> str:
    payload = json.dumps({"subcommand": sub, **cfg}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:8]


def _make_outdir(base: str, sub: str, cfg: dict) -> str:
    stamp = datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%SZ")
    stem = os.path.join(base, f"{stamp}_{_config_hash(sub, cfg)}")
    path = stem
    # the run owns its directory exclusively; dodge same-second reruns
    for attempt in range(1, 1000):
        try:
            os.makedirs(path, exist_ok=False)
            return path
        except FileExistsError:
            path = f"{stem}-{attempt}"
    raise OSError(f"could not allocate an output directory under {base}")


def _write_metadata(outdir: str, sub: str, cfg: dict, extra: dict) -> None:
    payload = {
        "subcommand": sub,
        "config": cfg,
        "config_hash": _config_hash(sub, cfg),
        "version": __version__,
        **extra,
    }
    with open(os.path.join(outdir, "metadata.json"), "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _provenance_lines(sub: str, cfg: dict) -> list[str]:
    lines = [f"# subcommand={sub}", f"# config_hash={_config_hash(sub, cfg)}"]
    for key in sorted(cfg):
        lines.append(f"# {key}={cfg[key]}")
    return lines


def _write_csv(path: str, header_lines: list[str], columns: str, rows) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for line in header_lines:
            fh.write(line + "\n")
        fh.write(columns + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _fmt(x) -> str:
    return f"{float(x):.17g}"


def cmd_simulate(cfg: dict, outdir: str) -> int:
    spec = get_spec(cfg["spec"])
    n, m = int(cfg["n"]), int(cfg["m"])
    if cfg["state"]:
        u0 = load_state(cfg["state"])
    else:
        u0 = sample_states(
            n, float(cfg["radius"]), 1, np.random.default_rng(int(cfg["seed"]))
        )[0]
    fcfg = FlowConfig(
        dt=float(cfg["dt"]), n=n, m=m, scheme=str(cfg["scheme"]), t0=0.0,
        t1=float(cfg["t"]),
    )
    traj = flow(u0, fcfg, spec)
    meta = {
        "spec": spec.tag, "n": n, "m": m, "dt": fcfg.dt, "scheme": fcfg.scheme,
        "seed": int(cfg["seed"]),
    }
    save_trajectory(traj, os.path.join(outdir, "trajectory.csv"), meta)
    save_state(traj.states[-1], os.path.join(outdir, "final_state.csv"))
    final_norm = e_norm(traj.states[-1])
    _write_metadata(outdir, "simulate", cfg, {"final_norm": final_norm,
                                              "steps": len(traj.times) - 1})
    print(f"simulate: {len(traj.times) - 1} steps, final norm {final_norm:.6g}")
    return 0


def cmd_converge(cfg: dict, outdir: str) -> int:
    spec = get_spec(cfg["spec"])
    n_values = [int(v) for v in str(cfg["n_values"]).split(",") if v.strip()]
    report = epsilon_curve(
        spec, float(cfg["R"]), float(cfg["T"]), n_values, int(cfg["samples"]),
        int(cfg["seed"]), int(cfg["N_probe"]), int(cfg["m"]),
    )
    save_report(report, os.path.join(outdir, "epsilon.csv"))
    n_ref = 2 * max(n_values)
    fcfg = FlowConfig(dt=float(cfg["dt"]), n=n_ref, m=int(cfg["m"]))
    rows = []
    for n in n_values:
        err = approx_error(
            spec, float(cfg["flow_t"]), n, n_ref, float(cfg["R"]),
            int(cfg["flow_samples"]), int(cfg["seed"]), fcfg,
        )
        rows.append((str(n), _fmt(err)))
    _write_csv(
        os.path.join(outdir, "approx.csv"),
        _provenance_lines("converge", cfg) + [f"# N_ref={n_ref}"],
        "n,flow_error",
        rows,
    )
    decayed = report.isotonic_errors[-1] < report.isotonic_errors[0]
    _write_metadata(outdir, "converge", cfg, {"epsilon_decayed": bool(decayed)})
    for n, raw, iso in zip(report.n_values, report.raw_errors,
                           report.isotonic_errors):
        print(f"converge: n={n:4d} raw={raw:.6e} isotonic={iso:.6e}")
    if not decayed and spec.tag != "zero":
        print("converge: truncation error failed to decay", file=sys.stderr)
        return 2
    return 0


def cmd_camel(cfg: dict, outdir: str) -> int:
    name = str(cfg["system"])
    if name not in _SYSTEMS:
        raise UsageError(f"unknown system {name!r}; choices: {sorted(_SYSTEMS)}")
    sys_h = _SYSTEMS[name]()
    t = float(cfg["t"])
    r = float(cfg["r"])
    box = float(cfg["fiber_box"])
    if box <= 0:
        box = camel_fiber_bound(sys_h.certificate, r, t)
    n = sys_h.dim // 2
    cyl = CoisotropicCylinder(n=n, k=1, base=BallBase(r, 1), fiber_box=box)
    psi = flow_map(sys_h, t, float(cfg["dt"]), method="midpoint")
    pts = find_camel_points(
        psi, cyl, t, tol=float(cfg["tol"]), multistart=int(cfg["multistart"]),
        seed=int(cfg["seed"]),
    )
    report = camel_bound_check(sys_h, cyl, t, pts, dt=float(cfg["dt"]),
                               tol=float(cfg["bound_tol"]))
    rows = []
    for i in range(len(pts)):
        rows.append(tuple(_fmt(v) for v in pts.points[i])
                    + (_fmt(pts.residuals[i]),))
    coords = [f"z{i + 1}" for i in range(cyl.dim)]
    _write_csv(
        os.path.join(outdir, "camel_points.csv"),
        _provenance_lines("camel", cfg) + [f"# fiber_box={box:.17g}"],
        ",".join(coords) + ",residual",
        rows,
    )
    summary = {
        "found": len(pts),
        "bound": report.bound,
        "in_regime": report.in_regime,
        "regime_limit": report.regime_limit,
        "max_norm": report.max_norm,
        "norm_violations": list(report.norm_violations),
        "envelope_violations": list(report.envelope_violations),
        "passed": report.passed,
    }
    if len(pts):
        ball = min_enclosing_ball(reduce_points(pts, 1))
        summary["reduced_ball_radius"] = ball.radius
    with open(os.path.join(outdir, "summary.json"), "w", encoding="ascii") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_metadata(outdir, "camel", cfg, {"found": len(pts),
                                           "passed": report.passed})
    print(f"camel: {len(pts)} points, max |z| = {report.max_norm:.6g}, "
          f"bound = {report.bound:.6g}, passed = {report.passed}")
    return 0 if report.passed else 2


def cmd_modes(cfg: dict, outdir: str) -> int:
    spec = get_spec(cfg["spec"])
    fcfg = FlowConfig(dt=float(cfg["dt"]), n=int(cfg["n"]), m=int(cfg["m"]),
                      scheme=str(cfg["scheme"]))
    result = maximize_mode(
        spec, int(cfg["l"]), int(cfg["k"]), float(cfg["r"]), float(cfg["t"]),
        fcfg, budget=int(cfg["budget"]), seed=int(cfg["seed"]),
        fiber_box=float(cfg["fiber_box"]),
    )
    rows = [
        (str(s), _fmt(result.values[s]), _fmt(result.reduced_points[s, 0]),
         _fmt(result.reduced_points[s, 1]))
        for s in range(len(result.values))
    ]
    _write_csv(
        os.path.join(outdir, "modes.csv"),
        _provenance_lines("modes", cfg),
        "start,value,image_a,image_b",
        rows,
    )
    save_state(result.best_state, os.path.join(outdir, "best_state.csv"))
    ball = min_enclosing_ball(result.reduced_points)
    _write_metadata(outdir, "modes", cfg, {
        "best_value": result.best_value,
        "reduced_ball_radius": ball.radius,
    })
    print(f"modes: best |U_l| = {result.best_value:.6g}, "
          f"reduced cloud radius = {ball.radius:.6g}")
    return 0


def cmd_capacity(cfg: dict, outdir: str) -> int:
    shape = str(cfg["shape"])
    if shape:
        if shape == "ball":
            entries = [capacity_oracle("ball", r=float(cfg["r"]), n=int(cfg["n"]))]
        elif shape == "cylinder":
            entries = [capacity_oracle("cylinder", r=float(cfg["r"]),
                                       n=int(cfg["n"]))]
        elif shape == "torus":
            entries = [capacity_oracle("torus", r=float(cfg["r"]),
                                       m=int(cfg["m"]))]
        elif shape == "coisotropic":
            entries = [capacity_oracle("coisotropic", k=int(cfg["k"]),
                                       n=int(cfg["n"]))]
        else:
            raise UsageError(f"unsupported shape {shape!r}")
    else:
        entries = capacity_table()
    rows = []
    consistent = True
    for e in entries:
        rows.append((e.shape, json.dumps(dict(e.params), sort_keys=True),
                     _fmt(e.c_value), _fmt(e.gamma_value), e.note))
        consistent &= e.c_value <= e.gamma_value + 1e-12
        params = dict(e.params)
        if "r" in params:
            scaled = capacity_oracle(
                e.shape, **{**params, "r": 2.0 * params["r"]})
            consistent &= abs(scaled.c_value - 4.0 * e.c_value) <= 1e-12
    _write_csv(
        os.path.join(outdir, "capacity.csv"),
        _provenance_lines("capacity", cfg),
        "shape,params,c,gamma,note",
        rows,
    )
    _write_metadata(outdir, "capacity", cfg, {"entries": len(entries),
                                              "consistent": bool(consistent)})
    for e in entries:
        print(f"capacity: {e.shape} {dict(e.params)} c={e.c_value:.12g} "
              f"gamma={e.gamma_value:.12g}")
    return 0 if consistent else 2


def cmd_displace(cfg: dict, outdir: str) -> int:
    report = displacement_demo(
        samples=int(cfg["samples"]), seed=int(cfg["seed"]), dim=int(cfg["dim"]),
        q_box=float(cfg["q_box"]), p_box=float(cfg["p_box"]),
    )
    summary = {
        "samples": report.samples,
        "violations": report.violations,
        "min_margin": report.min_margin,
        "energy_bound": report.energy_bound,
        "profile": report.profile,
        "passed": report.passed,
    }
    with open(os.path.join(outdir, "summary.json"), "w", encoding="ascii") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_metadata(outdir, "displace", cfg, {"passed": report.passed})
    print(f"displace: {report.samples} samples, {report.violations} violations, "
          f"energy bound {report.energy_bound:.6g}")
    return 0 if report.passed else 2


def cmd_algebra(cfg: dict, outdir: str) -> int:
    sys_h = coupled_oscillator()
    sys_k = harmonic_oscillator(sys_h.dim)
    rng = np.random.default_rng(int(cfg["seed"]))
    points = rng.uniform(-1.0, 1.0, (int(cfg["points"]), sys_h.dim))
    t = float(cfg["t"])
    comp_err = verify_composition(sys_h, sys_k, t, points, dt=float(cfg["dt"]),
                                  inner_dt=float(cfg["inner_dt"]))
    inv_err = verify_inverse(sys_h, t, points, dt=float(cfg["dt"]),
                             inner_dt=float(cfg["inner_dt"]))
    tol = float(cfg["tol"])
    passed = comp_err < tol and inv_err < tol
    summary = {"composition_error": comp_err, "inverse_error": inv_err,
               "tolerance": tol, "passed": passed}
    with open(os.path.join(outdir, "summary.json"), "w", encoding="ascii") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    _write_metadata(outdir, "algebra", cfg, {"passed": passed})
    print(f"algebra: composition error {comp_err:.3e}, "
          f"inverse error {inv_err:.3e}")
    return 0 if passed else 2


_COMMANDS = {
    "simulate": cmd_simulate,
    "converge": cmd_converge,
    "camel": cmd_camel,
    "modes": cmd_modes,
    "capacity": cmd_capacity,
    "displace": cmd_displace,
    "algebra": cmd_algebra,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _resolve(args.subcommand, args)
        outdir = _make_outdir(args.out, args.subcommand, cfg)
        return _COMMANDS[args.subcommand](cfg, outdir)
    except UsageError as exc:
        print(f"camel-lab: {exc}", file=sys.stderr)
        return 1
    except FlowDivergenceError as exc:
        print(f"camel-lab: {exc}", file=sys.stderr)
        return 2
    except (ValueError, TypeError, OSError) as exc:
        print(f"camel-lab: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
