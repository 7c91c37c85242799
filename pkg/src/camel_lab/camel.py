"""Coisotropic cylinders, camel points, reduction, and capacity oracles.

The geometric toolkit: cylinders X x R^{n-k} inside C^k x C^{n-k} (interleaved
real coordinates q_1, p_1, ..., q_n, p_n), the multistart search for points
whose time-t image lands in the transverse slice C^k x iR^{n-k}, symplectic
reduction of the found set, the norm bound certified by a gradient growth
certificate |grad H| <= A + B|z|, cutoff Hamiltonians, closed-form capacity
values on model shapes, mode-amplitude maximization for the string flow, and
the composition/inverse calculus of Hamiltonian functions.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.optimize

from .integrators import (
    FlowConfig,
    GenericHamiltonianSystem,
    _march_arrays,
    flow_map,
    integrate_generic,
    midpoint_step_generic,
    symplectic_matrix_generic,
)
from .minball import Ball, min_enclosing_ball
from .nonlinearity import NonlinearitySpec
from .phase_space import PhaseVector

__all__ = [
    "BallBase",
    "PolydiskBase",
    "TorusBase",
    "CloudBase",
    "CoisotropicCylinder",
    "CamelPointSet",
    "CamelBoundReport",
    "CapacityOracleEntry",
    "DisplacementProfile",
    "DisplacementReport",
    "ModeSearchResult",
    "SwapReport",
    "Ball",
    "min_enclosing_ball",
    "sample_cylinder",
    "find_camel_points",
    "verify_camel_bisection",
    "reduce_points",
    "camel_fiber_bound",
    "camel_bound_check",
    "cutoff_hamiltonian",
    "coupled_oscillator",
    "harmonic_oscillator",
    "arctan_profile",
    "displacement_system",
    "exact_displacement_map",
    "displacement_demo",
    "compose_hamiltonians",
    "invert_hamiltonian",
    "verify_composition",
    "verify_inverse",
    "capacity_oracle",
    "capacity_table",
    "maximize_mode",
    "swap_counterexample",
    "thread_count",
]


def thread_count() -> int:
    """Worker cap for parallel sections; CAMEL_LAB_THREADS overrides."""
    env = os.environ.get("CAMEL_LAB_THREADS", "")
    if env.strip():
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


# ---------------------------------------------------------------------------
# Base shapes and cylinders
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BallBase:
    """Round ball of radius r in C^k (2k real dimensions)."""

    r: float
    k: int = 1

    def __post_init__(self):
        if self.r <= 0 or self.k < 1:
            raise ValueError("ball base needs r > 0 and k >= 1")

    @property
    def dim(self) -> int:
        return 2 * self.k

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        d = self.dim
        z = rng.standard_normal((count, d))
        z /= np.maximum(np.linalg.norm(z, axis=-1, keepdims=True), 1e-300)
        return z * (self.r * rng.random((count, 1)) ** (1.0 / d))

    def contains(self, xy: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        return np.linalg.norm(xy, axis=-1) <= self.r + tol


@dataclass(frozen=True)
class PolydiskBase:
    """Product of disks, |z_i| <= r_i for i = 1..k."""

    radii: tuple

    def __post_init__(self):
        object.__setattr__(self, "radii", tuple(float(r) for r in self.radii))
        if not self.radii or any(r <= 0 for r in self.radii):
            raise ValueError("polydisk base needs positive radii")

    @property
    def k(self) -> int:
        return len(self.radii)

    @property
    def dim(self) -> int:
        return 2 * self.k

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        out = np.empty((count, self.dim))
        for i, r in enumerate(self.radii):
            rho = r * np.sqrt(rng.random(count))
            theta = rng.uniform(0.0, 2.0 * np.pi, count)
            out[:, 2 * i] = rho * np.cos(theta)
            out[:, 2 * i + 1] = rho * np.sin(theta)
        return out

    def contains(self, xy: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        ok = np.ones(xy.shape[:-1], dtype=bool)
        for i, r in enumerate(self.radii):
            ok &= np.hypot(xy[..., 2 * i], xy[..., 2 * i + 1]) <= r + tol
        return ok


@dataclass(frozen=True)
class TorusBase:
    """Product of circles |z_i| = r (a Lagrangian torus), i = 1..k."""

    r: float
    k: int = 1

    def __post_init__(self):
        if self.r <= 0 or self.k < 1:
            raise ValueError("torus base needs r > 0 and k >= 1")

    @property
    def dim(self) -> int:
        return 2 * self.k

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        out = np.empty((count, self.dim))
        for i in range(self.k):
            theta = rng.uniform(0.0, 2.0 * np.pi, count)
            out[:, 2 * i] = self.r * np.cos(theta)
            out[:, 2 * i + 1] = self.r * np.sin(theta)
        return out

    def contains(self, xy: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        ok = np.ones(xy.shape[:-1], dtype=bool)
        for i in range(self.k):
            rad = np.hypot(xy[..., 2 * i], xy[..., 2 * i + 1])
            ok &= np.abs(rad - self.r) <= tol
        return ok


@dataclass(frozen=True, eq=False)
class CloudBase:
    """Finite point cloud in R^{2k} used as a base set."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or len(pts) == 0 or pts.shape[1] % 2 != 0:
            raise ValueError("cloud base needs a non-empty (count, 2k) array")
        pts = pts.copy()
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def k(self) -> int:
        return self.points.shape[1] // 2

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        idx = rng.integers(0, len(self.points), count)
        return self.points[idx].copy()

    def contains(self, xy: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        xy = np.asarray(xy, dtype=float)
        flat = xy.reshape(-1, self.dim)
        dist = np.min(
            np.linalg.norm(flat[:, None, :] - self.points[None, :, :], axis=-1),
            axis=1,
        )
        return (dist <= tol).reshape(xy.shape[:-1])


@dataclass(frozen=True)
class CoisotropicCylinder:
    """Base x R^{n-k}: base in the first k complex coordinates, real fiber.

    Fiber points have q_{k+1..n} free (sampled within [-fiber_box, fiber_box])
    and p_{k+1..n} = 0.  Coordinates are interleaved (q_1, p_1, ..., q_n, p_n).
    """

    n: int
    k: int
    base: object
    fiber_box: float

    def __post_init__(self):
        if not 1 <= self.k < self.n:
            raise ValueError(f"need 1 <= k < n, got k={self.k}, n={self.n}")
        if self.fiber_box <= 0:
            raise ValueError("fiber_box must be positive")
        if getattr(self.base, "k", None) != self.k:
            raise ValueError("base complex dimension must equal k")

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def fiber_dim(self) -> int:
        return self.n - self.k

    def fiber_q_indices(self) -> np.ndarray:
        return np.arange(2 * self.k, 2 * self.n, 2)

    def fiber_p_indices(self) -> np.ndarray:
        return np.arange(2 * self.k + 1, 2 * self.n, 2)

    def contains(self, z: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        ok = self.base.contains(z[..., : 2 * self.k], tol)
        ok &= np.all(np.abs(z[..., self.fiber_p_indices()]) <= tol, axis=-1)
        return ok


def sample_cylinder(cyl: CoisotropicCylinder, count: int, seed: int = 0) -> np.ndarray:
    """Seeded samples of the cylinder as (count, 2n) interleaved coordinates."""
    if count < 0:
        raise ValueError("count must be non-negative")
    rng = np.random.default_rng(seed)
    z = np.zeros((count, cyl.dim))
    if count == 0:
        return z
    z[:, : 2 * cyl.k] = cyl.base.sample(count, rng)
    z[:, cyl.fiber_q_indices()] = rng.uniform(
        -cyl.fiber_box, cyl.fiber_box, (count, cyl.fiber_dim)
    )
    return z


# ---------------------------------------------------------------------------
# Camel points
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CamelPointSet:
    """Cylinder points whose time-t image has vanishing transverse real parts.

    points holds the initial conditions, images their time-t flow images, and
    residuals the max-norm of the fiber q-components of each image.
    """

    points: np.ndarray
    images: np.ndarray
    residuals: np.ndarray
    t: float
    cylinder: CoisotropicCylinder

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        img = np.asarray(self.images, dtype=float)
        res = np.asarray(self.residuals, dtype=float)
        d = self.cylinder.dim
        if pts.ndim != 2 or pts.shape[1] != d:
            raise ValueError(f"points must be (count, {d})")
        if img.shape != pts.shape or res.shape != (len(pts),):
            raise ValueError("images and residuals must align with points")
        if len(pts) and not np.all(self.cylinder.contains(pts, tol=1e-6)):
            raise ValueError("every camel point must lie in the cylinder")
        for name, arr in (("points", pts), ("images", img), ("residuals", res)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.points)


def _assemble_fiber(base_block: np.ndarray, fiber_q: np.ndarray, cyl) -> np.ndarray:
    z = np.zeros(base_block.shape[:-1] + (cyl.dim,))
    z[..., : 2 * cyl.k] = base_block
    z[..., cyl.fiber_q_indices()] = fiber_q
    return z


def find_camel_points(
    flow: Callable[[np.ndarray], np.ndarray],
    cyl: CoisotropicCylinder,
    t: float,
    tol: float = 1e-8,
    multistart: int = 64,
    seed: int = 0,
    max_iter: int = 80,
) -> CamelPointSet:
    """Multistart root search for Re-part-vanishing images over the cylinder.

    Each start fixes a sampled base point and solves the n-k equations
    (fiber q-components of flow(z)) = 0 in the n-k fiber unknowns: a batched
    damped Newton iteration when the fiber is a line, a hybrid Powell solver
    per start otherwise.  Roots are accepted on a fresh residual evaluation
    <= tol, deduplicated, and returned sorted for determinism.  An empty set
    is a valid outcome.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if multistart < 1:
        raise ValueError("multistart must be >= 1")
    rng = np.random.default_rng(seed)
    qf = cyl.fiber_q_indices()
    base = cyl.base.sample(multistart, rng)
    x0 = rng.uniform(-cyl.fiber_box, cyl.fiber_box, (multistart, cyl.fiber_dim))

    def residual(z):
        return np.asarray(flow(z))[..., qf]

    if cyl.fiber_dim == 1:
        roots = _newton_fiber_line(residual, base, x0, cyl, tol, max_iter)
    else:
        roots = _root_fiber_multi(residual, base, x0, cyl, tol)

    if len(roots) == 0:
        empty = np.zeros((0, cyl.dim))
        return CamelPointSet(empty, empty, np.zeros(0), t, cyl)

    # Independent residual re-evaluation on the accepted candidates.
    res = np.max(np.abs(residual(roots)), axis=-1)
    roots = _dedupe_rows(roots[res <= tol])
    if len(roots) == 0:
        empty = np.zeros((0, cyl.dim))
        return CamelPointSet(empty, empty, np.zeros(0), t, cyl)
    images = np.asarray(flow(roots))
    res = np.max(np.abs(images[..., qf]), axis=-1)
    return CamelPointSet(roots, images, res, t, cyl)


def _newton_fiber_line(residual, base, x0, cyl, tol, max_iter):
    """Damped Newton with central FD slope, batched over all starts."""
    count = len(base)
    x = x0[:, 0].copy()
    box = cyl.fiber_box
    active = np.ones(count, dtype=bool)
    for _ in range(max_iter):
        h = 1e-6 * np.maximum(1.0, np.abs(x))
        stacked = np.concatenate([x, x + h, x - h])
        z = _assemble_fiber(np.tile(base, (3, 1)), stacked[:, None], cyl)
        r_all = residual(z)[:, 0]
        r = r_all[:count]
        slope = (r_all[count : 2 * count] - r_all[2 * count :]) / (2.0 * h)
        active = np.abs(r) > 0.1 * tol
        if not np.any(active):
            break
        step = np.where(
            np.abs(slope) > 1e-14, -r / np.where(slope == 0, 1.0, slope), 0.0
        )
        # Degenerate slope: nudge along the sign of the residual instead.
        step = np.where(np.abs(slope) <= 1e-14, -np.sign(r) * 0.1 * box, step)
        step = np.clip(step, -0.5 * box, 0.5 * box)
        x = np.where(active, x + step, x)
    z = _assemble_fiber(base, x[:, None], cyl)
    r = residual(z)[:, 0]
    keep = (np.abs(r) <= tol) & (np.abs(x) <= 10.0 * box)
    return z[keep]


def _root_fiber_multi(residual, base, x0, cyl, tol):
    """Per-start hybrid Powell solve for fiber dimension above one."""

    def solve_one(i):
        def fun(xq):
            z = _assemble_fiber(base[i], np.asarray(xq), cyl)
            return residual(z[None, :])[0]

        sol = scipy.optimize.root(fun, x0[i], method="hybr", tol=tol * 1e-2)
        return sol.x if sol.success else None

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        sols = list(pool.map(solve_one, range(len(base))))
    hits = [
        _assemble_fiber(base[i], np.asarray(x), cyl)
        for i, x in enumerate(sols)
        if x is not None and np.all(np.abs(x) <= 10.0 * cyl.fiber_box)
    ]
    if not hits:
        return np.zeros((0, cyl.dim))
    return np.stack(hits)


def _dedupe_rows(rows: np.ndarray, decimals: int = 6) -> np.ndarray:
    key = np.round(rows, decimals)
    order = np.lexsort(key.T[::-1])
    rows = rows[order]
    key = key[order]
    keep = np.ones(len(rows), dtype=bool)
    keep[1:] = np.any(key[1:] != key[:-1], axis=1)
    return rows[keep]


def verify_camel_bisection(
    flow: Callable[[np.ndarray], np.ndarray],
    pts: CamelPointSet,
    match_tol: float = 1e-6,
    iters: int = 80,
) -> np.ndarray:
    """Re-find each root by sign-change bisection along its fiber line.

    Only meaningful for fiber dimension one.  Returns a boolean per point:
    True when a bracket with a sign change exists around the reported root
    and the bisection limit agrees with it to match_tol.
    """
    cyl = pts.cylinder
    if cyl.fiber_dim != 1:
        raise ValueError("bisection verification needs a one-dimensional fiber")
    count = len(pts)
    if count == 0:
        return np.zeros(0, dtype=bool)
    qf = cyl.fiber_q_indices()
    base = pts.points[:, : 2 * cyl.k]
    x_star = pts.points[:, qf[0]].copy()

    def res_at(x):
        z = _assemble_fiber(base, x[:, None], cyl)
        return np.asarray(flow(z))[:, qf[0]]

    lo = np.empty(count)
    hi = np.empty(count)
    bracketed = np.zeros(count, dtype=bool)
    d = np.full(count, 1e-4 * max(1.0, cyl.fiber_box))
    for _ in range(40):
        todo = ~bracketed
        if not np.any(todo):
            break
        r_lo = res_at(x_star - d)
        r_hi = res_at(x_star + d)
        found = todo & (r_lo * r_hi < 0)
        lo[found] = x_star[found] - d[found]
        hi[found] = x_star[found] + d[found]
        bracketed |= found
        d = np.where(todo, d * 1.6, d)
        if np.all(d > 4.0 * cyl.fiber_box):
            break
    verified = bracketed.copy()
    if not np.any(bracketed):
        return verified
    idx = np.where(bracketed)[0]
    lo_b, hi_b = lo[idx], hi[idx]
    base_b = base[idx]

    def res_sub(x):
        z = _assemble_fiber(base_b, x[:, None], cyl)
        return np.asarray(flow(z))[:, qf[0]]

    r_lo = res_sub(lo_b)
    for _ in range(iters):
        mid = 0.5 * (lo_b + hi_b)
        r_mid = res_sub(mid)
        go_left = r_lo * r_mid <= 0
        hi_b = np.where(go_left, mid, hi_b)
        lo_b = np.where(go_left, lo_b, mid)
        r_lo = np.where(go_left, r_lo, r_mid)
    mid = 0.5 * (lo_b + hi_b)
    verified[idx] = np.abs(mid - x_star[idx]) <= match_tol * np.maximum(
        1.0, np.abs(x_star[idx])
    )
    return verified


def reduce_points(pts: CamelPointSet, k: int) -> np.ndarray:
    """Symplectic reduction of the camel set: first 2k coordinates after flowing."""
    if not 1 <= k <= pts.cylinder.n:
        raise ValueError(f"k must lie in [1, {pts.cylinder.n}], got {k}")
    return pts.images[:, : 2 * k].copy()


# ---------------------------------------------------------------------------
# The certified norm bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CamelBoundReport:
    bound: float
    in_regime: bool
    regime_limit: float
    n_points: int
    max_norm: float
    norm_violations: tuple
    envelope_violations: tuple
    passed: bool


def camel_fiber_bound(
    certificate: tuple, r: float, t: float, margin: float = 1.25
) -> float:
    """Fiber box large enough to cover every admissible camel point.

    Returns margin * (r + A/B) / (2 - e^{B|t|}); any camel point of a flow
    with |grad H| <= A + B|z| lies inside that radius, so sampling the fiber
    within it misses nothing.
    """
    A, B = certificate
    if B <= 0:
        raise ValueError("certificate needs B > 0")
    denom = 2.0 - math.exp(B * abs(t))
    if denom <= 0:
        raise ValueError(f"|t| must be below ln2/B = {math.log(2.0) / B:.6g}")
    return margin * (r + A / B) / denom


def camel_bound_check(
    sys: GenericHamiltonianSystem,
    cyl: CoisotropicCylinder,
    t: float,
    pts: CamelPointSet,
    dt: float = 1e-3,
    tol: float = 1e-2,
) -> CamelBoundReport:
    """Check every camel point against the certified norm bound.

    With |grad H| <= A + B|z| and a ball base of radius r, each camel point
    satisfies |z| <= (r + A/B) / (2 - e^{B|t|}) within the regime
    |t| < ln2/(3B).  Along the re-integrated trajectory the growth envelopes
    |psi_s(z)| <= e^{Bs}(|z| + A/B) - A/B and
    |psi_s(z) - z| <= (e^{Bs} - 1)(|z| + A/B) are checked at every step.
    """
    if sys.certificate is None:
        raise ValueError("system carries no (A, B) certificate")
    A, B = sys.certificate
    if B <= 0:
        raise ValueError("bound formula needs B > 0")
    if not isinstance(cyl.base, BallBase):
        raise TypeError("bound check expects a ball base")
    r = cyl.base.r
    regime = math.log(2.0) / (3.0 * B)
    in_regime = abs(t) < regime
    denom = 2.0 - math.exp(B * abs(t))
    bound = (r + A / B) / denom if denom > 0 else math.inf
    norms = np.linalg.norm(pts.points, axis=-1) if len(pts) else np.zeros(0)
    bad = np.where(norms > bound * (1.0 + tol))[0]

    env_bad: set = set()
    if len(pts):
        z0 = pts.points
        n0 = np.linalg.norm(z0, axis=-1)
        cur = z0.copy()
        s = 0.0
        direction = 1.0 if t >= 0 else -1.0
        total = abs(t)
        while s < total - 1e-15 * max(1.0, total):
            step = min(dt, total - s)
            cur = midpoint_step_generic(cur, direction * s, direction * step, sys)
            s += step
            grow = math.exp(B * s) * (n0 + A / B)
            cn = np.linalg.norm(cur, axis=-1)
            slack = 1.0 + tol
            over1 = cn > (grow - A / B) * slack + 1e-12
            over2 = np.linalg.norm(cur - z0, axis=-1) > (
                grow - (n0 + A / B)
            ) * slack + 1e-12
            env_bad.update(np.where(over1 | over2)[0].tolist())

    report = CamelBoundReport(
        bound=float(bound),
        in_regime=in_regime,
        regime_limit=float(regime),
        n_points=len(pts),
        max_norm=float(np.max(norms)) if len(pts) else 0.0,
        norm_violations=tuple(int(i) for i in bad),
        envelope_violations=tuple(sorted(int(i) for i in env_bad)),
        passed=len(bad) == 0 and not env_bad,
    )
    return report


# ---------------------------------------------------------------------------
# Cutoff Hamiltonians
# ---------------------------------------------------------------------------


def _smoothstep_window(norm: np.ndarray, R: float) -> tuple[np.ndarray, np.ndarray]:
    """Quintic profile: 1 on [0, R], 0 on [2R, inf), |chi'| <= 15/(8R)."""
    s = np.clip((norm - R) / R, 0.0, 1.0)
    chi = 1.0 - s**3 * (10.0 - 15.0 * s + 6.0 * s**2)
    dchi = -30.0 * s**2 * (1.0 - s) ** 2 / R
    return chi, dchi


def cutoff_hamiltonian(
    sys: GenericHamiltonianSystem, R: float
) -> GenericHamiltonianSystem:
    """G(t, z) = chi(|z|) H(t, z) with a quintic window on [R, 2R].

    Needs the value callable with H(t, 0) = 0.  When sys certifies
    |grad H| <= A + B|z|, the cutoff satisfies |grad G| <= 5A + 3B|z|:
    on the annulus, |H(z)| <= A|z| + B|z|^2/2 and |chi'| <= 2/R give
    (2/R)(A|z| + B|z|^2/2) <= 4A + 2B|z| for |z| <= 2R, plus the original
    A + B|z|.
    """
    if R <= 0:
        raise ValueError("R must be positive")
    if sys.value is None:
        raise ValueError("cutoff needs the Hamiltonian value, not only its gradient")
    h0 = float(np.asarray(sys.value(0.0, np.zeros(sys.dim))))
    if abs(h0) > 1e-12:
        raise ValueError(f"cutoff requires H(t, 0) = 0, got {h0:.3e}")
    probe = np.linspace(0.0, 3.0 * R, 4097)
    _, dchi = _smoothstep_window(probe, R)
    if np.max(np.abs(dchi)) > 2.0 / R + 1e-12:
        raise AssertionError("window profile violates the slope bound 2/R")

    def value(t, z):
        z = np.asarray(z, dtype=float)
        norm = np.linalg.norm(z, axis=-1)
        chi, _ = _smoothstep_window(norm, R)
        return chi * np.asarray(sys.value(t, z))

    def grad(t, z):
        z = np.asarray(z, dtype=float)
        norm = np.linalg.norm(z, axis=-1)
        chi, dchi = _smoothstep_window(norm, R)
        g = chi[..., None] * np.asarray(sys.grad(t, z), dtype=float)
        radial = np.where(norm > 0, dchi * np.asarray(sys.value(t, z)), 0.0)
        unit = z / np.maximum(norm, 1e-300)[..., None]
        return g + radial[..., None] * unit

    cert = None
    if sys.certificate is not None:
        A, B = sys.certificate
        cert = (5.0 * A, 3.0 * B)
    return GenericHamiltonianSystem(
        dim=sys.dim,
        grad=grad,
        value=value,
        certificate=cert,
        name=f"{sys.name}-cutoff",
    )


# ---------------------------------------------------------------------------
# Built-in systems
# ---------------------------------------------------------------------------


def coupled_oscillator() -> GenericHamiltonianSystem:
    """Two unit oscillators with a bounded trigonometric coupling.

    H = (q1^2 + p1^2 + q2^2 + p2^2)/2 + sin(q1) sin(q2)/2 on interleaved
    coordinates.  The gradient obeys |grad H| <= 0.5 + |z| exactly, so the
    certificate is (0.5, 1.0), and H(0) = 0.
    """

    def value(t, z):
        z = np.asarray(z, dtype=float)
        return 0.5 * np.sum(z * z, axis=-1) + 0.5 * np.sin(z[..., 0]) * np.sin(
            z[..., 2]
        )

    def grad(t, z):
        z = np.asarray(z, dtype=float)
        g = z.copy()
        g[..., 0] += 0.5 * np.cos(z[..., 0]) * np.sin(z[..., 2])
        g[..., 2] += 0.5 * np.sin(z[..., 0]) * np.cos(z[..., 2])
        return g

    return GenericHamiltonianSystem(
        dim=4,
        grad=grad,
        value=value,
        certificate=(0.5, 1.0),
        name="coupled-oscillator",
    )


def harmonic_oscillator(dim: int = 4) -> GenericHamiltonianSystem:
    """H = |z|^2 / 2; the flow rotates every (q_j, p_j) plane clockwise."""

    def value(t, z):
        z = np.asarray(z, dtype=float)
        return 0.5 * np.sum(z * z, axis=-1)

    def grad(t, z):
        return np.asarray(z, dtype=float).copy()

    return GenericHamiltonianSystem(
        dim=dim, grad=grad, value=value, certificate=(0.0, 1.0), name="harmonic"
    )


# ---------------------------------------------------------------------------
# Displacement demonstration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DisplacementProfile:
    """Smooth increasing profile f: R -> (0, 1) with its derivative."""

    f: Callable[[np.ndarray], np.ndarray]
    fprime: Callable[[np.ndarray], np.ndarray]
    sup_f: float
    sup_fprime: float
    name: str = "profile"


def arctan_profile() -> DisplacementProfile:
    return DisplacementProfile(
        f=lambda x: np.arctan(x) / np.pi + 0.5,
        fprime=lambda x: 1.0 / (np.pi * (1.0 + np.asarray(x, float) ** 2)),
        sup_f=1.0,
        sup_fprime=1.0 / np.pi,
        name="arctan",
    )


def _check_profile(profile: DisplacementProfile) -> None:
    x = np.linspace(-50.0, 50.0, 401)
    fx = np.asarray(profile.f(x), dtype=float)
    dfx = np.asarray(profile.fprime(x), dtype=float)
    if np.any(dfx <= 0):
        raise ValueError("profile derivative must be positive on probes")
    if np.any(fx <= 0) or np.any(fx >= 1):
        raise ValueError("profile values must stay inside (0, 1) on probes")
    h = 1e-6
    fd = (np.asarray(profile.f(x + h)) - np.asarray(profile.f(x - h))) / (2 * h)
    if np.max(np.abs(fd - dfx)) > 1e-4 * max(1.0, float(np.max(np.abs(dfx)))):
        raise ValueError("profile derivative disagrees with finite differences")


def displacement_system(
    profile: DisplacementProfile, dim: int = 2
) -> GenericHamiltonianSystem:
    """H(q, p) = -2 f(q_n): bounded, and its flow shears p_n by 2t f'(q_n)."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    qn = 2 * (dim - 1)

    def value(t, z):
        z = np.asarray(z, dtype=float)
        return -2.0 * np.asarray(profile.f(z[..., qn]), dtype=float)

    def grad(t, z):
        z = np.asarray(z, dtype=float)
        g = np.zeros_like(z)
        g[..., qn] = -2.0 * np.asarray(profile.fprime(z[..., qn]), dtype=float)
        return g

    return GenericHamiltonianSystem(
        dim=2 * dim,
        grad=grad,
        value=value,
        certificate=(2.0 * profile.sup_fprime, 0.0),
        name=f"displacement-{profile.name}",
    )


def exact_displacement_map(
    profile: DisplacementProfile, t: float, dim: int = 2
) -> Callable[[np.ndarray], np.ndarray]:
    """Closed form of the flow: identity except p_n -> p_n + 2t f'(q_n)."""
    qn = 2 * (dim - 1)

    def psi(z: np.ndarray) -> np.ndarray:
        z = np.array(z, dtype=float)
        z[..., qn + 1] += 2.0 * t * np.asarray(profile.fprime(z[..., qn]), dtype=float)
        return z

    return psi


@dataclass(frozen=True)
class DisplacementReport:
    samples: int
    violations: int
    min_margin: float
    energy_bound: float
    profile: str
    passed: bool


def displacement_demo(
    profile: Optional[DisplacementProfile] = None,
    samples: int = 100_000,
    seed: int = 0,
    dim: int = 2,
    q_box: float = 3.0,
    p_box: float = 1.0,
) -> DisplacementReport:
    """Displace V = {|p_n| < f'(q_n)} by the time-1 flow of -2 f(q_n).

    Each sampled point of V maps to p_n + 2 f'(q_n) whose modulus exceeds
    f'(q_n) strictly (|p_n + 2f'| >= 2f' - |p_n| > f'), so the image avoids
    V.  The reported energy bound is twice the profile's supremum.
    """
    if profile is None:
        profile = arctan_profile()
    _check_profile(profile)
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    qn = 2 * (dim - 1)
    z = np.empty((samples, 2 * dim))
    z[:, 0::2] = rng.uniform(-q_box, q_box, (samples, dim))
    z[:, 1::2] = rng.uniform(-p_box, p_box, (samples, dim))
    slope = np.asarray(profile.fprime(z[:, qn]), dtype=float)
    z[:, qn + 1] = rng.uniform(-1.0, 1.0, samples) * slope * (1.0 - 1e-9)

    image = exact_displacement_map(profile, 1.0, dim)(z)
    margin = np.abs(image[:, qn + 1]) - slope
    violations = int(np.sum(margin <= 0))
    return DisplacementReport(
        samples=samples,
        violations=violations,
        min_margin=float(np.min(margin)),
        energy_bound=2.0 * profile.sup_f,
        profile=profile.name,
        passed=violations == 0,
    )


# ---------------------------------------------------------------------------
# Composition and inversion of Hamiltonians
# ---------------------------------------------------------------------------


def _fd_grad_from_value(value, dim: int, delta: float):
    """Central-difference gradient of a batched value callable."""
    shifts = np.concatenate([np.eye(dim) * delta, -np.eye(dim) * delta])

    def grad(t, z):
        z = np.asarray(z, dtype=float)
        pts = z[..., None, :] + shifts  # (..., 2d, d)
        flat = pts.reshape(-1, dim)
        vals = np.asarray(value(t, flat), dtype=float).reshape(pts.shape[:-1])
        return (vals[..., :dim] - vals[..., dim:]) / (2.0 * delta)

    return grad


def compose_hamiltonians(
    sys_h: GenericHamiltonianSystem,
    sys_k: GenericHamiltonianSystem,
    inner_dt: float = 1e-2,
    fd_delta: float = 1e-5,
    inner_method: str = "rk4",
) -> GenericHamiltonianSystem:
    """The Hamiltonian generating the composed flow of sys_h after sys_k.

    Value: (H # K)(t, z) = H(t, z) + K(t, inverse-flow of H at time t applied
    to z); the gradient is taken by central differences of the value, each
    evaluation integrating the inner flow with a fixed-step method (smooth in
    z, so the differences converge to the gradient of the discrete value).
    """
    if sys_h.dim != sys_k.dim:
        raise ValueError("systems must share a dimension")
    if sys_h.value is None or sys_k.value is None:
        raise ValueError("composition needs value callables on both systems")

    def value(t, z):
        z = np.asarray(z, dtype=float)
        if t == 0.0:
            w = z
        else:
            w = integrate_generic(sys_h, z, t, 0.0, inner_dt, method=inner_method)
        return np.asarray(sys_h.value(t, z), dtype=float) + np.asarray(
            sys_k.value(t, w), dtype=float
        )

    return GenericHamiltonianSystem(
        dim=sys_h.dim,
        grad=_fd_grad_from_value(value, sys_h.dim, fd_delta),
        value=value,
        name=f"{sys_h.name}#{sys_k.name}",
    )


def invert_hamiltonian(
    sys_h: GenericHamiltonianSystem,
    inner_dt: float = 1e-2,
    fd_delta: float = 1e-5,
    inner_method: str = "rk4",
) -> GenericHamiltonianSystem:
    """The Hamiltonian generating the inverse flow: -H(t, flow of H at t)."""
    if sys_h.value is None:
        raise ValueError("inversion needs the value callable")

    def value(t, z):
        z = np.asarray(z, dtype=float)
        if t == 0.0:
            w = z
        else:
            w = integrate_generic(sys_h, z, 0.0, t, inner_dt, method=inner_method)
        return -np.asarray(sys_h.value(t, w), dtype=float)

    return GenericHamiltonianSystem(
        dim=sys_h.dim,
        grad=_fd_grad_from_value(value, sys_h.dim, fd_delta),
        value=value,
        name=f"{sys_h.name}-bar",
    )


def verify_composition(
    sys_h: GenericHamiltonianSystem,
    sys_k: GenericHamiltonianSystem,
    t: float,
    points: np.ndarray,
    dt: float = 1e-3,
    method: str = "rk4",
    inner_dt: float = 1e-2,
) -> float:
    """Max pointwise error of flow(H#K) against flow(H) after flow(K)."""
    comp = compose_hamiltonians(sys_h, sys_k, inner_dt=inner_dt)
    lhs = flow_map(comp, t, dt, method=method)(points)
    rhs = flow_map(sys_h, t, dt, method=method)(
        flow_map(sys_k, t, dt, method=method)(points)
    )
    return float(np.max(np.linalg.norm(lhs - rhs, axis=-1)))


def verify_inverse(
    sys_h: GenericHamiltonianSystem,
    t: float,
    points: np.ndarray,
    dt: float = 1e-3,
    method: str = "rk4",
    inner_dt: float = 1e-2,
) -> float:
    """Max pointwise error of flow(inverse-H) after flow(H) against identity."""
    bar = invert_hamiltonian(sys_h, inner_dt=inner_dt)
    forward = flow_map(sys_h, t, dt, method=method)(np.asarray(points, dtype=float))
    back = flow_map(bar, t, dt, method=method)(forward)
    return float(np.max(np.linalg.norm(back - np.asarray(points), axis=-1)))


# ---------------------------------------------------------------------------
# Capacity oracles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CapacityOracleEntry:
    shape: str
    params: tuple
    c_value: float
    gamma_value: float
    note: str

    def __post_init__(self):
        if self.c_value < 0 or self.gamma_value < 0:
            raise ValueError("capacities are non-negative")
        if (
            math.isfinite(self.c_value)
            and math.isfinite(self.gamma_value)
            and self.c_value > self.gamma_value + 1e-12
        ):
            raise ValueError("c must not exceed gamma")


def capacity_oracle(shape: str, **params) -> CapacityOracleEntry:
    """Closed-form capacity pair (c, gamma) for the model shapes.

    ball(r, n): round ball, both pi r^2.  cylinder(r, n): disk times C^{n-1},
    both pi r^2 (the normalization makes balls and cylinders agree).
    torus(r, m): product of m circles of radius r, both pi r^2 (displacement
    energy of the product torus equals the area of one factor disk).
    coisotropic(k, n), k < n: split subspace C^k x R^{n-k}, both zero.
    Every value scales as lambda^2 under shape dilation by lambda.
    """
    p = dict(params)
    if shape == "ball":
        r = float(p.pop("r", 1.0))
        n = int(p.pop("n", 1))
        _oracle_checks(p, r > 0 and n >= 1, "ball needs r > 0, n >= 1")
        v = math.pi * r * r
        return CapacityOracleEntry(
            "ball", (("n", n), ("r", r)), v, v, "normalization on round balls"
        )
    if shape == "cylinder":
        r = float(p.pop("r", 1.0))
        n = int(p.pop("n", 2))
        _oracle_checks(p, r > 0 and n >= 1, "cylinder needs r > 0, n >= 1")
        v = math.pi * r * r
        return CapacityOracleEntry(
            "cylinder",
            (("n", n), ("r", r)),
            v,
            v,
            "disk cross-section fixes the value regardless of the free factors",
        )
    if shape == "torus":
        r = float(p.pop("r", 1.0))
        m = int(p.pop("m", 1))
        _oracle_checks(p, r > 0 and m >= 1, "torus needs r > 0, m >= 1")
        v = math.pi * r * r
        return CapacityOracleEntry(
            "torus",
            (("m", m), ("r", r)),
            v,
            v,
            "product torus displaces at the energy of one factor disk",
        )
    if shape == "coisotropic":
        k = int(p.pop("k", 1))
        n = int(p.pop("n", 2))
        _oracle_checks(p, 0 <= k < n, "coisotropic needs 0 <= k < n")
        return CapacityOracleEntry(
            "coisotropic",
            (("k", k), ("n", n)),
            0.0,
            0.0,
            "split subspaces with a real factor squeeze to zero",
        )
    raise ValueError(f"unsupported shape {shape!r}")


def _oracle_checks(leftover: dict, ok: bool, msg: str) -> None:
    if leftover:
        raise ValueError(f"unknown parameters {sorted(leftover)}")
    if not ok:
        raise ValueError(msg)


def capacity_table() -> list[CapacityOracleEntry]:
    """The canonical oracle rows exercised by the self-consistency checks."""
    return [
        capacity_oracle("ball", r=1.0, n=1),
        capacity_oracle("ball", r=1.0, n=2),
        capacity_oracle("ball", r=2.0, n=2),
        capacity_oracle("cylinder", r=1.0, n=2),
        capacity_oracle("cylinder", r=0.5, n=3),
        capacity_oracle("torus", r=1.0, m=1),
        capacity_oracle("torus", r=1.0, m=2),
        capacity_oracle("coisotropic", k=1, n=2),
        capacity_oracle("coisotropic", k=2, n=3),
    ]


# ---------------------------------------------------------------------------
# Mode-amplitude maximization
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ModeSearchResult:
    best_state: PhaseVector
    best_value: float
    values: np.ndarray
    reduced_points: np.ndarray
    l: int
    k: int
    t0: float

    def __post_init__(self):
        for name in ("values", "reduced_points"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def maximize_mode(
    spec: NonlinearitySpec,
    l: int,
    k: int,
    X,
    t0: float,
    cfg: FlowConfig,
    budget: int = 64,
    seed: int = 0,
    fiber_box: float = 1.0,
    sweeps: int = 20,
    polish_evals: Optional[int] = None,
) -> ModeSearchResult:
    """Maximize |U_l(t0)| over cylinder-type initial data by multistart search.

    Search space: the mode-l coefficient pair inside the disk X (a BallBase
    radius or a plain number), every other low mode |j| <= k pinned to zero,
    the high-mode b-coefficients zero, and the high-mode a-coefficients free
    in [-fiber_box, fiber_box].  Each start runs a batched coordinate search
    followed by a Nelder-Mead polish; per-start seeds are spawned from the
    master seed, so enlarging the budget only adds starts and the best value
    is monotone non-decreasing in the budget.
    """
    n = cfg.n
    if not 0 < abs(l) <= k <= n:
        raise ValueError(f"need 0 < |l| <= k <= n, got l={l}, k={k}, n={n}")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if t0 < 0:
        raise ValueError("t0 must be non-negative")
    R = X.r if isinstance(X, BallBase) else float(X)
    if R <= 0:
        raise ValueError("mode disk radius must be positive")
    mode_idx = l + n
    js = np.arange(-n, n + 1)
    fiber_idx = np.where(np.abs(js) > k)[0]
    D = 2 + len(fiber_idx)

    def final_mode(xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        xs = np.asarray(xs, dtype=float)
        a = np.zeros(xs.shape[:-1] + (2 * n + 1,))
        b = np.zeros_like(a)
        a[..., mode_idx] = xs[..., 0]
        b[..., mode_idx] = xs[..., 1]
        a[..., fiber_idx] = xs[..., 2:]
        af, bf = _march_arrays(a, b, 0.0, t0, cfg.dt, cfg.scheme, spec, n, cfg.m)
        uv = np.stack([af[..., mode_idx], bf[..., mode_idx]], axis=-1)
        return np.hypot(uv[..., 0], uv[..., 1]), uv

    def project(xs: np.ndarray) -> np.ndarray:
        rad = np.hypot(xs[..., 0], xs[..., 1])
        shrink = np.where(rad > R, R / np.maximum(rad, 1e-300), 1.0)
        xs[..., 0] *= shrink
        xs[..., 1] *= shrink
        xs[..., 2:] = np.clip(xs[..., 2:], -fiber_box, fiber_box)
        return xs

    children = np.random.SeedSequence(seed).spawn(budget)
    x = np.empty((budget, D))
    for s, child in enumerate(children):
        rng = np.random.default_rng(child)
        theta = rng.uniform(0.0, 2.0 * np.pi)
        rho = R * rng.uniform(0.7, 1.0)
        x[s, 0] = rho * np.cos(theta)
        x[s, 1] = rho * np.sin(theta)
        x[s, 2:] = rng.uniform(-fiber_box, fiber_box, D - 2)

    best_val, _ = final_mode(x)
    scales = np.concatenate([[R, R], np.full(D - 2, fiber_box)])
    step = np.full(budget, 0.3)
    for _ in range(sweeps):
        improved = np.zeros(budget, dtype=bool)
        for d in range(D):
            cand = np.concatenate([x, x], axis=0)
            cand[:budget, d] += step * scales[d]
            cand[budget:, d] -= step * scales[d]
            cand = project(cand)
            vals, _ = final_mode(cand)
            up, down = vals[:budget], vals[budget:]
            pick_up = (up >= down) & (up > best_val)
            pick_down = (down > up) & (down > best_val)
            x[pick_up] = cand[:budget][pick_up]
            x[pick_down] = cand[budget:][pick_down]
            best_val = np.maximum(best_val, np.maximum(up, down))
            improved |= pick_up | pick_down
        step = np.where(improved, step, step * 0.5)
        if np.all(step < 1e-7):
            break

    if polish_evals is None:
        polish_evals = max(40, 2 * D)
    if polish_evals > 0:
        for s in range(budget):
            res = scipy.optimize.minimize(
                lambda xs: -float(final_mode(project(np.array(xs))[None, :])[0][0]),
                x[s],
                method="Nelder-Mead",
                options={"maxfev": polish_evals, "xatol": 1e-7, "fatol": 1e-12},
            )
            cand = project(np.asarray(res.x, dtype=float)[None, :])[0]
            val = float(final_mode(cand[None, :])[0][0])
            if val > best_val[s]:
                best_val[s] = val
                x[s] = cand

    final_vals, uv = final_mode(x)
    best = int(np.argmax(final_vals))
    a0 = np.zeros(2 * n + 1)
    b0 = np.zeros(2 * n + 1)
    a0[mode_idx] = x[best, 0]
    b0[mode_idx] = x[best, 1]
    a0[fiber_idx] = x[best, 2:]
    return ModeSearchResult(
        best_state=PhaseVector(n, a0, b0),
        best_value=float(final_vals[best]),
        values=final_vals,
        reduced_points=uv,
        l=l,
        k=k,
        t0=t0,
    )


# ---------------------------------------------------------------------------
# The coordinate-swap fixture
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SwapReport:
    k: int
    n: int
    samples: int
    symplectic_ok: bool
    image_p_part_max: float
    projection_c: float
    projection_gamma: float
    double_swap_identity: bool
    passed: bool


def _swap_permutation(k: int, n: int) -> np.ndarray:
    order = list(range(k, n)) + list(range(k))
    perm = []
    for c in order:
        perm.extend([2 * c, 2 * c + 1])
    return np.array(perm)


def swap_counterexample(
    k: int, n: int, X=None, samples: int = 256, seed: int = 0, fiber_box: float = 1.0
) -> SwapReport:
    """Block swap of complex coordinates applied to a cylinder sample.

    The linear map (z_1..z_n) -> (z_{k+1}..z_n, z_1..z_k) is symplectic and
    sends the cylinder to a set whose k-projection lies inside the totally
    real R^k (p-parts exactly zero), a set of capacity zero: no positive
    lower bound survives an arbitrary split of the coordinates.
    """
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    if X is None:
        X = BallBase(1.0, k)
    cyl = CoisotropicCylinder(n=n, k=k, base=X, fiber_box=fiber_box)
    z = sample_cylinder(cyl, samples, seed)
    perm = _swap_permutation(k, n)
    P = np.eye(2 * n)[perm]
    omega = symplectic_matrix_generic(2 * n)
    symplectic_ok = np.array_equal(P.T @ omega @ P, omega)

    img = z[:, perm]
    p_part = (
        float(np.max(np.abs(img[:, 1 : 2 * k : 2]))) if samples and k >= 1 else 0.0
    )
    entry = capacity_oracle("coisotropic", k=0, n=k)

    perm_back = _swap_permutation(n - k, n)
    double_identity = bool(np.array_equal(perm[perm_back], np.arange(2 * n)))

    return SwapReport(
        k=k,
        n=n,
        samples=samples,
        symplectic_ok=bool(symplectic_ok),
        image_p_part_max=p_part,
        projection_c=entry.c_value,
        projection_gamma=entry.gamma_value,
        double_swap_identity=double_identity,
        passed=bool(symplectic_ok) and p_part == 0.0 and double_identity,
    )
