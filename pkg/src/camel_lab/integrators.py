"""Time integration for the truncated string equation and generic systems.

The truncated flow is integrated by Strang splitting between two exactly
solvable pieces: the mode-diagonal linear flow exp(dt J A) and the nonlinear
kick.  The kick freezes f's time argument, which makes its substep the exact
flow of an autonomous Hamiltonian (the gradient has only plus-part
coefficients, which the kick leaves untouched), so every substep is exactly
symplectic and the composition is too; the scheme is second order.

A Picard iteration on the integral form

    u(t) = exp(tJA) u0 + int_0^t exp((t-s)JA) J grad_h_s(u(s)) ds

discretized by Gauss-Legendre collocation serves as the reference solver.

Finite-dimensional Hamiltonian systems on R^{2n} (used by the cylinder
geometry tools) use interleaved coordinates z = (q_1, p_1, ..., q_n, p_n)
and the implicit midpoint rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .linear_ops import apply_exp_tJA_arrays
from .nonlinearity import NonlinearitySpec, grad_h_trunc_arrays, h_value
from .phase_space import PhaseVector, lambda_weights

__all__ = [
    "FlowConfig",
    "Trajectory",
    "GenericHamiltonianSystem",
    "FlowDivergenceError",
    "kick_step",
    "strang_step",
    "lie_step",
    "flow",
    "interaction_flow",
    "picard_mild",
    "midpoint_step_generic",
    "integrate_generic",
    "flow_map",
    "jacobian_fd",
    "apply_J_generic",
    "symplectic_matrix_generic",
    "symplectic_matrix_state",
    "state_flatten",
    "state_unflatten",
    "make_strang_step_map",
    "quadratic_energy",
    "total_energy",
    "save_trajectory",
    "load_trajectory",
]

DIVERGENCE_GUARD = 1e8


class FlowDivergenceError(RuntimeError):
    """State norm exceeded the divergence guard; signals a bug, not physics."""


@dataclass(frozen=True)
class FlowConfig:
    """Stepper configuration for the truncated string flow."""

    dt: float
    n: int
    m: int
    scheme: str = "strang"
    t0: float = 0.0
    t1: float = 1.0

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.t1 < self.t0:
            raise ValueError(f"t1 must be >= t0, got [{self.t0}, {self.t1}]")
        if self.scheme not in ("strang", "lie", "picard"):
            raise ValueError(f"unknown scheme {self.scheme!r}")


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: tuple

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if len(t) != len(self.states):
            raise ValueError("times and states must align")
        if len(t) > 1 and not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        orders = {u.n for u in self.states}
        if len(orders) > 1:
            raise ValueError("states must share a truncation order")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "states", tuple(self.states))


# ---------------------------------------------------------------------------
# String-equation steppers (array core + PhaseVector wrappers)
# ---------------------------------------------------------------------------


def _kick_arrays(a, b, t_star, dt, spec, n, m):
    g = grad_h_trunc_arrays(spec, t_star, a, n, m)
    return a, b - dt * g


def _strang_arrays(a, b, t, dt, spec, n, m):
    a, b = _kick_arrays(a, b, t, 0.5 * dt, spec, n, m)
    a, b = apply_exp_tJA_arrays(a, b, dt)
    return _kick_arrays(a, b, t + dt, 0.5 * dt, spec, n, m)


def _lie_arrays(a, b, t, dt, spec, n, m):
    a, b = _kick_arrays(a, b, t, dt, spec, n, m)
    return apply_exp_tJA_arrays(a, b, dt)


_STEPPERS = {"strang": _strang_arrays, "lie": _lie_arrays}


def kick_step(
    u: PhaseVector, t_star: float, dt: float, spec: NonlinearitySpec, n: int, m: int
) -> PhaseVector:
    """Exact flow of the frozen-time nonlinear Hamiltonian: b -= dt * grad.

    The gradient depends on the a-coefficients only, so it is constant along
    the kick; two half-kicks at the same frozen time equal one full kick.
    """
    a, b = _kick_arrays(u.a, u.b, t_star, dt, spec, n, m)
    return PhaseVector(u.n, a.copy(), b)


def strang_step(
    u: PhaseVector, t: float, dt: float, spec: NonlinearitySpec, n: int, m: int
) -> PhaseVector:
    """kick(dt/2 at t) -> exp(dt JA) -> kick(dt/2 at t+dt); symplectic, order 2."""
    a, b = _strang_arrays(u.a, u.b, t, dt, spec, n, m)
    return PhaseVector(u.n, a, b)


def lie_step(
    u: PhaseVector, t: float, dt: float, spec: NonlinearitySpec, n: int, m: int
) -> PhaseVector:
    """kick(dt at t) -> exp(dt JA); symplectic, first order."""
    a, b = _lie_arrays(u.a, u.b, t, dt, spec, n, m)
    return PhaseVector(u.n, a, b)


def _guard(a: np.ndarray, b: np.ndarray, t: float) -> None:
    norm2 = float(np.max(np.sum(a * a, axis=-1) + np.sum(b * b, axis=-1)))
    if not np.isfinite(norm2) or norm2 > DIVERGENCE_GUARD**2:
        raise FlowDivergenceError(
            f"state norm {np.sqrt(norm2):.3e} exceeded guard {DIVERGENCE_GUARD:.0e} "
            f"at t={t:.6g}"
        )


def _march_arrays(a, b, t0, t1, dt, scheme, spec, n, m, record=None):
    """March from t0 to t1 with fixed steps (last step shortened to hit t1)."""
    stepper = _STEPPERS[scheme]
    t = t0
    while t < t1 - 1e-15 * max(1.0, abs(t1)):
        step = min(dt, t1 - t)
        a, b = stepper(a, b, t, step, spec, n, m)
        t += step
        _guard(a, b, t)
        if record is not None:
            record(t, a, b)
    return a, b


def flow(u0: PhaseVector, cfg: FlowConfig, spec: NonlinearitySpec) -> Trajectory:
    """Integrate over [t0, t1], recording every accepted step.

    Modes with |j| > cfg.n feel only the linear flow (the kick is supported
    on |j| <= n).  Guards against divergence; scheme 'picard' delegates each
    recorded interval to the reference solver.
    """
    if cfg.n > u0.n:
        raise ValueError(f"cfg.n={cfg.n} exceeds state order {u0.n}")
    times = [cfg.t0]
    states = [u0]
    if cfg.scheme == "picard":
        t = cfg.t0
        u = u0
        while t < cfg.t1 - 1e-15 * max(1.0, abs(cfg.t1)):
            step = min(cfg.dt, cfg.t1 - t)
            u = _picard_shifted(u, t, step, spec, cfg.n, cfg.m, tol=1e-12)
            t += step
            times.append(t)
            states.append(u)
        return Trajectory(np.array(times), tuple(states))

    def record(t, a, b):
        times.append(t)
        states.append(PhaseVector(u0.n, a.copy(), b.copy()))

    _march_arrays(u0.a, u0.b, cfg.t0, cfg.t1, cfg.dt, cfg.scheme, spec, cfg.n, cfg.m, record)
    return Trajectory(np.array(times), tuple(states))


def interaction_flow(
    u0: PhaseVector, t: float, cfg: FlowConfig, spec: NonlinearitySpec
) -> PhaseVector:
    """exp(-tJA) composed with the truncated flow from 0 to t.

    Acts as the identity on coefficients with |j| > cfg.n: those modes evolve
    linearly under the flow and the conjugation undoes it exactly.
    """
    a, b = _interaction_arrays(u0.a, u0.b, t, cfg, spec)
    return PhaseVector(u0.n, a, b)


def _interaction_arrays(a, b, t, cfg, spec):
    if t < 0:
        raise ValueError("interaction flow expects t >= 0")
    a, b = _march_arrays(a, b, 0.0, t, cfg.dt, cfg.scheme, spec, cfg.n, cfg.m)
    return apply_exp_tJA_arrays(a, b, -t)


# ---------------------------------------------------------------------------
# Picard iteration on the Duhamel integral form
# ---------------------------------------------------------------------------


@lru_cache(maxsize=16)
def _collocation_data(q: int):
    """Gauss-Legendre nodes on [-1, 1] and the node-to-node integration matrix.

    W[i, k] = integral of the k-th Lagrange basis polynomial from -1 to xi_i,
    computed in the Legendre basis for conditioning.
    """
    xi, gl_w = np.polynomial.legendre.leggauss(q)
    V = np.polynomial.legendre.legvander(xi, q - 1)
    C = np.linalg.solve(V, np.eye(q))  # Legendre coefficients of Lagrange basis
    Cint = np.polynomial.legendre.legint(C, axis=0)
    # legval lays the series index first: vals[k, i] = (int L_k)(xi_i).
    vals = np.polynomial.legendre.legval(xi, Cint)
    at_left = np.polynomial.legendre.legval(-1.0, Cint)
    return xi, gl_w, np.ascontiguousarray((vals - at_left[:, None]).T)


def _picard_collocation(a0, b0, t_start, w, q, spec, n, m, tol_inner, max_iter=200):
    xi, gl_w, W = _collocation_data(q)
    s = 0.5 * w * (xi + 1.0)  # local node times in [0, w] (signed)
    half_w = 0.5 * w
    K = a0.shape[-1]
    # Node states initialized on the linear flow.
    A = np.empty((q, K))
    B = np.empty((q, K))
    for i in range(q):
        A[i], B[i] = apply_exp_tJA_arrays(a0, b0, s[i])
    A_lin, B_lin = A.copy(), B.copy()
    prev_delta = None
    for it in range(max_iter):
        if _time_independent(spec):
            G = grad_h_trunc_arrays(spec, 0.0, A, n, m)
        else:
            G = np.stack(
                [grad_h_trunc_arrays(spec, t_start + s[k], A[k], n, m) for k in range(q)]
            )
        newA = A_lin.copy()
        newB = B_lin.copy()
        for i in range(q):
            for k in range(q):
                coeff = half_w * W[i, k]
                if coeff == 0.0:
                    continue
                da, db = apply_exp_tJA_arrays(np.zeros(K), -G[k], s[i] - s[k])
                newA[i] += coeff * da
                newB[i] += coeff * db
        delta = float(
            np.sqrt(np.max(np.sum((newA - A) ** 2 + (newB - B) ** 2, axis=-1)))
        )
        A, B = newA, newB
        if delta < tol_inner:
            break
        if prev_delta is not None and delta > prev_delta and delta > 1e3 * tol_inner:
            raise RuntimeError(
                f"Picard iteration not contracting: successive deltas "
                f"{prev_delta:.3e} -> {delta:.3e} (window {w:.3g})"
            )
        prev_delta = delta
    else:
        raise RuntimeError(
            f"Picard iteration failed to reach tol={tol_inner:.1e} in {max_iter} "
            f"iterations; last delta {delta:.3e}, contraction "
            f"{delta / prev_delta if prev_delta else float('nan'):.3f}"
        )
    # Assemble the endpoint with the exact Gauss-Legendre end weights.
    aw, bw = apply_exp_tJA_arrays(a0, b0, w)
    for k in range(q):
        da, db = apply_exp_tJA_arrays(np.zeros(K), -G[k], w - s[k])
        aw = aw + half_w * gl_w[k] * da
        bw = bw + half_w * gl_w[k] * db
    return aw, bw


def _time_independent(spec: NonlinearitySpec) -> bool:
    return spec.tag in ("sine_gordon", "zero")


def _picard_window(a0, b0, t_start, w, spec, n, m, tol):
    q = 12
    prev = None
    # Refine the node count until the window result settles within tol.
    while q <= 28:
        aw, bw = _picard_collocation(a0, b0, t_start, w, q, spec, n, m, tol / 4.0)
        if prev is not None:
            diff = float(np.sqrt(np.sum((aw - prev[0]) ** 2 + (bw - prev[1]) ** 2)))
            if diff < tol / 4.0:
                return aw, bw
        prev = (aw, bw)
        q += 8
    return prev


def _picard_shifted(u0, t_start, t_len, spec, n, m, tol):
    a, b = u0.a, u0.b
    remaining = t_len
    t_cur = t_start
    while abs(remaining) > 1e-15 * max(1.0, abs(t_len)):
        w = np.sign(remaining) * min(0.5, abs(remaining))
        a, b = _picard_window(a, b, t_cur, w, spec, n, m, tol)
        t_cur += w
        remaining -= w
    return PhaseVector(u0.n, a, b)


def picard_mild(
    u0: PhaseVector,
    t: float,
    spec: NonlinearitySpec,
    n: int,
    m: int,
    tol: float = 1e-10,
) -> PhaseVector:
    """Reference solver: fixed-point iteration of the integral form.

    Marches in windows short enough for the Duhamel map to contract,
    collocating each window on Gauss-Legendre nodes and refining the node
    count until the result settles below tol.  Raises if the iteration stops
    contracting (reporting the measured contraction factor).
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if n > u0.n:
        raise ValueError(f"truncation {n} exceeds state order {u0.n}")
    return _picard_shifted(u0, 0.0, t, spec, n, m, tol)


# ---------------------------------------------------------------------------
# Generic finite-dimensional Hamiltonian systems
# ---------------------------------------------------------------------------


def apply_J_generic(v: np.ndarray) -> np.ndarray:
    """Standard complex structure on interleaved (q, p) coordinates."""
    out = np.empty_like(v)
    out[..., 0::2] = v[..., 1::2]
    out[..., 1::2] = -v[..., 0::2]
    return out


@dataclass(frozen=True)
class GenericHamiltonianSystem:
    """Hamiltonian system on R^{2n}, interleaved coordinates (q_1, p_1, ...).

    grad maps (t, z) -> grad H, acting along the last axis of batched z.
    value (optional) evaluates H itself; certificate (A, B), when given,
    promises |grad H(t, z)| <= A + B|z| and is spot-checked on probes.
    """

    dim: int
    grad: Callable[[float, np.ndarray], np.ndarray]
    value: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    certificate: Optional[tuple] = None
    name: str = "custom"
    probe_certificate: bool = field(default=True, repr=False)

    def __post_init__(self):
        if self.dim <= 0 or self.dim % 2 != 0:
            raise ValueError(f"dim must be a positive even integer, got {self.dim}")
        g0 = np.asarray(self.grad(0.0, np.zeros(self.dim)), dtype=float)
        if g0.shape != (self.dim,) or not np.all(np.isfinite(g0)):
            raise ValueError("grad must return a finite vector of length dim")
        if self.certificate is not None and self.probe_certificate:
            A, B = self.certificate
            if A < 0 or B < 0:
                raise ValueError("certificate constants must be non-negative")
            rng = np.random.default_rng(718281828)
            z = rng.standard_normal((128, self.dim))
            z *= (5.0 * rng.random((128, 1)) ** 0.5) / np.maximum(
                np.linalg.norm(z, axis=-1, keepdims=True), 1e-30
            )
            for t in (0.0, 0.7, -1.3):
                gn = np.linalg.norm(
                    np.asarray(self.grad(t, z), dtype=float), axis=-1
                )
                bound = A + B * np.linalg.norm(z, axis=-1)
                if np.any(gn > bound * (1.0 + 1e-9) + 1e-12):
                    worst = float(np.max(gn - bound))
                    raise ValueError(
                        f"certificate |grad| <= {A} + {B}|z| violated on probes "
                        f"by {worst:.3e}"
                    )

    def vector_field(self, t: float, z: np.ndarray) -> np.ndarray:
        return apply_J_generic(np.asarray(self.grad(t, z), dtype=float))


def midpoint_step_generic(
    z: np.ndarray,
    t: float,
    dt: float,
    sys: GenericHamiltonianSystem,
    tol: float = 1e-13,
    max_iter: int = 100,
) -> np.ndarray:
    """Implicit midpoint step z' = z + dt * J grad H((z+z')/2, t+dt/2).

    Fixed-point stage solve; symplectic, second order.  Accepts batched z
    along the last axis.  Raises on stage-solve non-convergence.
    """
    z = np.asarray(z, dtype=float)
    t_mid = t + 0.5 * dt
    z_new = z + dt * sys.vector_field(t_mid, z)
    for _ in range(max_iter):
        z_next = z + dt * sys.vector_field(t_mid, 0.5 * (z + z_new))
        delta = float(np.max(np.abs(z_next - z_new)))
        z_new = z_next
        if delta < tol * max(1.0, float(np.max(np.abs(z_new)))):
            return z_new
    raise RuntimeError(
        f"midpoint stage solve did not converge (dt={dt}, last delta {delta:.3e})"
    )


def _rk4_step(z, t, dt, sys):
    k1 = sys.vector_field(t, z)
    k2 = sys.vector_field(t + 0.5 * dt, z + 0.5 * dt * k1)
    k3 = sys.vector_field(t + 0.5 * dt, z + 0.5 * dt * k2)
    k4 = sys.vector_field(t + dt, z + dt * k3)
    return z + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate_generic(
    sys: GenericHamiltonianSystem,
    z0: np.ndarray,
    t0: float,
    t1: float,
    dt: float,
    method: str = "midpoint",
) -> np.ndarray:
    """March z0 from t0 to t1 with fixed signed steps (last step shortened).

    method 'midpoint' is symplectic; 'rk4' is a non-symplectic fourth-order
    alternative used where only accuracy matters (inner flows of composed
    Hamiltonians).
    """
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if method not in ("midpoint", "rk4"):
        raise ValueError(f"unknown method {method!r}")
    z = np.asarray(z0, dtype=float)
    t = t0
    direction = 1.0 if t1 >= t0 else -1.0
    while direction * (t1 - t) > 1e-15 * max(1.0, abs(t1)):
        step = direction * min(dt, direction * (t1 - t))
        if method == "midpoint":
            z = midpoint_step_generic(z, t, step, sys)
        else:
            z = _rk4_step(z, t, step, sys)
        t += step
        if not np.all(np.isfinite(z)):
            raise FlowDivergenceError(f"generic flow diverged at t={t:.6g}")
    return z


def flow_map(
    sys: GenericHamiltonianSystem, t: float, dt: float, method: str = "midpoint"
) -> Callable[[np.ndarray], np.ndarray]:
    """The time-t map z -> psi_t(z) as a batched callable."""

    def psi(z: np.ndarray) -> np.ndarray:
        return integrate_generic(sys, z, 0.0, t, dt, method=method)

    return psi


def jacobian_fd(flowmap: Callable, z: np.ndarray, h: float) -> np.ndarray:
    """Central-difference Jacobian of a batched map at z.

    flowmap must act along the last axis; all flow maps in this package do.
    Column c holds (f(z + h e_c) - f(z - h e_c)) / (2h).
    """
    if h <= 0:
        raise ValueError(f"fd step must be positive, got {h}")
    z = np.asarray(z, dtype=float)
    d = z.shape[-1]
    shifts = np.concatenate([np.eye(d) * h, -np.eye(d) * h], axis=0)
    batch = flowmap(z[None, :] + shifts)
    return (batch[:d] - batch[d:]).T / (2.0 * h)


def symplectic_matrix_generic(dim: int) -> np.ndarray:
    """Matrix of the standard form on interleaved coordinates."""
    omega = np.zeros((dim, dim))
    for i in range(0, dim, 2):
        omega[i, i + 1] = 1.0
        omega[i + 1, i] = -1.0
    return omega


def symplectic_matrix_state(n: int) -> np.ndarray:
    """Matrix of the symplectic form on flattened (a, b) state coordinates."""
    k = 2 * n + 1
    omega = np.zeros((2 * k, 2 * k))
    omega[:k, k:] = np.eye(k)
    omega[k:, :k] = -np.eye(k)
    return omega


def state_flatten(u: PhaseVector) -> np.ndarray:
    return np.concatenate([u.a, u.b])


def state_unflatten(n: int, z: np.ndarray) -> PhaseVector:
    k = 2 * n + 1
    z = np.asarray(z, dtype=float)
    if z.shape != (2 * k,):
        raise ValueError(f"expected flat vector of length {2 * k}, got {z.shape}")
    return PhaseVector(n, z[:k], z[k:])


def make_strang_step_map(
    spec: NonlinearitySpec, t: float, dt: float, n: int, m: int, order: int
) -> Callable[[np.ndarray], np.ndarray]:
    """One Strang step as a batched map on flattened (a, b) vectors."""
    k = 2 * order + 1

    def step(z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        a, b = _strang_arrays(z[..., :k], z[..., k:], t, dt, spec, n, m)
        return np.concatenate([a, b], axis=-1)

    return step


# ---------------------------------------------------------------------------
# Energies and trajectory serialization
# ---------------------------------------------------------------------------


def quadratic_energy(u: PhaseVector) -> float:
    """(1/2) <Au, u> = (1/2) sum (lambda_j - 1/lambda_j) a_j^2 + lambda_j b_j^2."""
    lj = lambda_weights(u.n)
    return float(0.5 * (np.dot(lj - 1.0 / lj, u.a**2) + np.dot(lj, u.b**2)))


def total_energy(spec: NonlinearitySpec, t: float, u: PhaseVector, m: int) -> float:
    """Quadratic energy plus the nonlinear potential; drifts O(dt^2) under Strang."""
    return quadratic_energy(u) + h_value(spec, t, u, m)


def save_trajectory(traj: Trajectory, path, metadata: Optional[dict] = None) -> None:
    """Long-form CSV `t,j,a_j,b_j` with `# key=value` metadata lines."""
    lines = []
    for key, val in (metadata or {}).items():
        lines.append(f"# {key}={val}")
    lines.append("t,j,a_j,b_j")
    for t, u in zip(traj.times, traj.states):
        for i, j in enumerate(range(-u.n, u.n + 1)):
            lines.append(f"{t:.17g},{j},{u.a[i]:.17g},{u.b[i]:.17g}")
    text = "\n".join(lines) + "\n"
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(text)


def load_trajectory(path) -> tuple[Trajectory, dict]:
    """Read a trajectory written by save_trajectory."""
    if hasattr(path, "read"):
        text = path.read()
    else:
        with open(path, "r", encoding="ascii") as fh:
            text = fh.read()
    metadata = {}
    rows = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].strip().partition("=")
            metadata[key.strip()] = val
            continue
        if line.startswith("t,"):
            continue
        t_str, j_str, a_str, b_str = line.split(",")
        rows.append((float(t_str), int(j_str), float(a_str), float(b_str)))
    if not rows:
        raise ValueError("no trajectory rows found")
    n = max(abs(r[1]) for r in rows)
    times = sorted({r[0] for r in rows})
    k = 2 * n + 1
    by_time = {t: (np.zeros(k), np.zeros(k)) for t in times}
    for t, j, a, b in rows:
        arr_a, arr_b = by_time[t]
        arr_a[j + n] = a
        arr_b[j + n] = b
    states = tuple(PhaseVector(n, *by_time[t]) for t in times)
    return Trajectory(np.array(times), states), metadata
