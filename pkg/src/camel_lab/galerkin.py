"""Quantitative truncation-error studies for the spectral approximation.

Two experiments: the gradient-truncation curve eps(n), the sampled sup of
||grad_h(u) - grad_h_n(u)|| over a ball of smooth states, and the
interaction-flow error against a high reference truncation.  The eps curve is
non-increasing in n up to sampling noise; isotonic regression (pool adjacent
violators) reports a regularized monotone version next to the raw one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .integrators import FlowConfig, _interaction_arrays
from .nonlinearity import NonlinearitySpec, grad_h_arrays, grad_h_trunc_arrays
from .phase_space import PhaseVector, lambda_weights

__all__ = [
    "ConvergenceReport",
    "epsilon_curve",
    "approx_error",
    "isotonic_decreasing",
    "sample_ball_coeffs",
    "sample_states",
    "save_report",
    "load_report",
]


@dataclass(frozen=True)
class ConvergenceReport:
    R: float
    T: float
    n_values: tuple
    raw_errors: tuple
    isotonic_errors: tuple
    samples: int
    seed: int
    N_probe: int
    m: int

    def __post_init__(self):
        if len(self.n_values) != len(self.raw_errors) or len(self.n_values) != len(
            self.isotonic_errors
        ):
            raise ValueError("n_values and error arrays must align")
        if any(e < 0 for e in self.raw_errors):
            raise ValueError("errors must be non-negative")


def isotonic_decreasing(values) -> np.ndarray:
    """Best non-increasing fit in least squares (pool adjacent violators)."""
    vals = np.asarray(values, dtype=float)
    # PAVA on the reversed sequence enforces non-decreasing there, i.e.
    # non-increasing on the original.
    y = vals[::-1]
    level = []  # (mean, count) blocks
    for v in y:
        level.append([v, 1])
        while len(level) > 1 and level[-2][0] > level[-1][0]:
            m2, c2 = level.pop()
            m1, c1 = level.pop()
            level.append([(m1 * c1 + m2 * c2) / (c1 + c2), c1 + c2])
    out = np.concatenate([[blk[0]] * blk[1] for blk in level])
    return out[::-1]


def sample_ball_coeffs(
    order: int, radius: float, count: int, rng: np.random.Generator, decay: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Random smooth states in the energy ball of the given radius.

    Coefficients are drawn Gaussian with the spectral profile lambda_j^{-decay}
    (uniform-in-coefficients sampling at high order concentrates on rough
    functions), then rescaled to norm radius * xi^{1/4}, biased toward the
    boundary so sampled maxima track the sup over the ball.
    """
    k = 2 * order + 1
    profile = lambda_weights(order) ** -decay
    a = rng.standard_normal((count, k)) * profile
    b = rng.standard_normal((count, k)) * profile
    norms = np.sqrt(np.sum(a * a, axis=-1) + np.sum(b * b, axis=-1))
    target = radius * rng.random(count) ** 0.25
    scale = target / np.maximum(norms, 1e-300)
    return a * scale[:, None], b * scale[:, None]


def sample_states(
    order: int, radius: float, count: int, rng: np.random.Generator, decay: float = 1.0
) -> list[PhaseVector]:
    a, b = sample_ball_coeffs(order, radius, count, rng, decay)
    return [PhaseVector(order, a[i], b[i]) for i in range(count)]


def epsilon_curve(
    spec: NonlinearitySpec,
    R: float,
    T: float,
    n_values,
    samples: int,
    seed: int,
    N_probe: int,
    m: int,
) -> ConvergenceReport:
    """Sampled sup of the gradient-truncation error per truncation order.

    For each n, the max over sampled (t, u) in [-T, T] x B(0, R) of
    ||grad_h(t, u) - grad_h_n(t, u)||, states drawn at order N_probe.
    Reported raw and isotonically regularized (non-increasing).
    """
    n_values = tuple(int(n) for n in n_values)
    if any(n2 <= n1 for n1, n2 in zip(n_values, n_values[1:])):
        raise ValueError("n_values must be strictly increasing")
    if N_probe <= max(n_values):
        raise ValueError("N_probe must exceed every requested truncation")
    if R <= 0:
        raise ValueError("R must be positive")
    rng = np.random.default_rng(seed)
    a, _ = sample_ball_coeffs(N_probe, R, samples, rng)
    t_vals = rng.uniform(-T, T, samples)
    raw = []
    for n in n_values:
        worst = 0.0
        for i in range(samples):
            g_full = grad_h_arrays(spec, float(t_vals[i]), a[i], m)
            g_trunc = grad_h_trunc_arrays(spec, float(t_vals[i]), a[i], n, m)
            worst = max(worst, float(np.linalg.norm(g_full - g_trunc)))
        raw.append(worst)
    iso = isotonic_decreasing(raw)
    return ConvergenceReport(
        R=R,
        T=T,
        n_values=n_values,
        raw_errors=tuple(raw),
        isotonic_errors=tuple(float(e) for e in iso),
        samples=samples,
        seed=seed,
        N_probe=N_probe,
        m=m,
    )


def approx_error(
    spec: NonlinearitySpec,
    t: float,
    n: int,
    N_ref: int,
    R: float,
    samples: int,
    seed: int,
    cfg: FlowConfig,
) -> float:
    """Sampled sup of the interaction-flow truncation error at time t.

    Compares the interaction flow at truncation n with the one at N_ref on
    states drawn in B(0, R) at order N_ref; decreasing in n at fixed
    (t, R, N_ref).
    """
    if N_ref < n:
        raise ValueError(f"N_ref={N_ref} must be >= n={n}")
    rng = np.random.default_rng(seed)
    a, b = sample_ball_coeffs(N_ref, R, samples, rng)
    cfg_n = FlowConfig(dt=cfg.dt, n=n, m=cfg.m, scheme=cfg.scheme)
    cfg_ref = FlowConfig(dt=cfg.dt, n=N_ref, m=cfg.m, scheme=cfg.scheme)
    a_n, b_n = _interaction_arrays(a, b, t, cfg_n, spec)
    a_r, b_r = _interaction_arrays(a, b, t, cfg_ref, spec)
    err = np.sqrt(np.sum((a_n - a_r) ** 2 + (b_n - b_r) ** 2, axis=-1))
    return float(np.max(err))


def save_report(report: ConvergenceReport, path) -> None:
    """CSV `n,raw_error,isotonic_error` with `# key=value` metadata lines."""
    lines = [
        f"# R={report.R:.17g}",
        f"# T={report.T:.17g}",
        f"# samples={report.samples}",
        f"# seed={report.seed}",
        f"# N_probe={report.N_probe}",
        f"# m={report.m}",
        "n,raw_error,isotonic_error",
    ]
    for n, raw, iso in zip(report.n_values, report.raw_errors, report.isotonic_errors):
        lines.append(f"{n},{raw:.17g},{iso:.17g}")
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(text)


def load_report(path) -> ConvergenceReport:
    if hasattr(path, "read"):
        text = path.read()
    else:
        with open(path, "r", encoding="ascii") as fh:
            text = fh.read()
    meta = {}
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            meta[key.strip()] = val
        elif not line.startswith("n,"):
            n_str, raw_str, iso_str = line.split(",")
            rows.append((int(n_str), float(raw_str), float(iso_str)))
    return ConvergenceReport(
        R=float(meta["R"]),
        T=float(meta["T"]),
        n_values=tuple(r[0] for r in rows),
        raw_errors=tuple(r[1] for r in rows),
        isotonic_errors=tuple(r[2] for r in rows),
        samples=int(meta["samples"]),
        seed=int(meta["seed"]),
        N_probe=int(meta["N_probe"]),
        m=int(meta["m"]),
    )
