"""Nonlinear data f(t, x, u), its potential, and the pseudo-spectral gradient.

The nonlinear Hamiltonian is h_t(u, v) = (1/2pi) int_0^{2pi} F(t, x, u(x)) dx
with F the u-antiderivative of f.  Its gradient in the energy space is
(B^{-1} f(t, x, u(x)), 0): only the plus-part coefficients are nonzero.

Discretized on m equispaced points, h is evaluated as (1/m) sum_i F(t,x_i,u_i)
and grad_h as the exact gradient of that quadrature, which keeps the kick in
the splitting integrator exactly symplectic.  The discrete Parseval inequality
gives ||grad_h||_E <= C0 structurally, with C0 the certified bound on |f|.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .phase_space import (
    PhaseVector,
    coeffs_from_samples,
    grid_points,
    lambda_weights,
    project,
    samples_from_coeffs,
)

__all__ = [
    "NonlinearitySpec",
    "sine_gordon",
    "zero_nonlinearity",
    "custom_bounded",
    "get_spec",
    "BUILTIN_SPECS",
    "grad_h",
    "grad_h_trunc",
    "h_value",
    "grad_h_trunc_arrays",
    "h_value_arrays",
]


@dataclass(frozen=True)
class NonlinearitySpec:
    """Bounded nonlinearity f with certified sup bound C0.

    f maps (t, x, u) -> real and must act elementwise on array x, u.
    F, when given, is the u-antiderivative with F(t, x, 0) = 0; omitted,
    the potential is integrated numerically in u per grid point.
    """

    f: Callable[[float, np.ndarray, np.ndarray], np.ndarray]
    C0: float
    tag: str = "custom_bounded"
    F: Optional[Callable[[float, np.ndarray, np.ndarray], np.ndarray]] = None
    constants: dict = field(default_factory=dict)

    def __post_init__(self):
        if not np.isfinite(self.C0) or self.C0 < 0:
            raise ValueError(f"C0 must be finite and >= 0, got {self.C0}")


def sine_gordon() -> NonlinearitySpec:
    """f(t, x, u) = sin(u); F = 1 - cos(u); |f| <= 1."""
    return NonlinearitySpec(
        f=lambda t, x, u: np.sin(u),
        C0=1.0,
        tag="sine_gordon",
        F=lambda t, x, u: 1.0 - np.cos(u),
        constants={"C1": 1.0},
    )


def zero_nonlinearity() -> NonlinearitySpec:
    """f = 0: the dynamics reduce to the exact linear flow."""
    return NonlinearitySpec(
        f=lambda t, x, u: np.zeros_like(u),
        C0=0.0,
        tag="zero",
        F=lambda t, x, u: np.zeros_like(u),
    )


BUILTIN_SPECS = {
    "sine-gordon": sine_gordon,
    "sine_gordon": sine_gordon,
    "zero": zero_nonlinearity,
}


def get_spec(name: str) -> NonlinearitySpec:
    """Look up a built-in nonlinearity by CLI name."""
    try:
        return BUILTIN_SPECS[name]()
    except KeyError:
        raise ValueError(
            f"unknown nonlinearity {name!r}; known: {sorted(set(BUILTIN_SPECS))}"
        ) from None


def _probe_bound(f, C0: float) -> None:
    # Spot-check |f| <= C0 on a coarse (t, x, u) probe grid; declarations are
    # not trusted silently.
    t_vals = np.array([0.0, -1.0, 1.0, 10.0])
    x = grid_points(16)
    u = np.concatenate([np.linspace(-50.0, 50.0, 41), np.array([0.0, 1e-3, -1e-3])])
    xx, uu = np.meshgrid(x, u)
    for t in t_vals:
        vals = np.asarray(f(float(t), xx, uu), dtype=float)
        worst = float(np.max(np.abs(vals)))
        if not np.isfinite(worst):
            raise ValueError("f returned a non-finite value on probes")
        if worst > C0 * (1.0 + 1e-12) + 1e-300:
            raise ValueError(
                f"declared bound C0={C0} violated on probes: |f| reached {worst}"
            )


def custom_bounded(f, C0: float, F=None, tag: str = "custom_bounded") -> NonlinearitySpec:
    """Wrap a user nonlinearity, spot-checking the declared bound on probes."""
    _probe_bound(f, C0)
    return NonlinearitySpec(f=f, C0=float(C0), tag=tag, F=F)


def _check_m(order: int, m: int) -> None:
    if m < 4 * (order + 1):
        raise ValueError(
            f"grid size {m} too small for order {order}; need m >= {4 * (order + 1)}"
        )
    if m & (m - 1) != 0:
        raise ValueError(f"grid size must be a power of two, got {m}")


def grad_h_arrays(spec: NonlinearitySpec, t: float, a: np.ndarray, m: int) -> np.ndarray:
    """Plus-part gradient coefficients for batched a of shape (..., 2n+1).

    Pipeline: synthesize u on the grid, apply f pointwise, analyze back,
    weight by lambda^{-1/2} (the B^{-1} after the basis weight).
    """
    n = (a.shape[-1] - 1) // 2
    w = lambda_weights(n) ** -0.5
    u_samples = samples_from_coeffs(a * w, m)
    x = grid_points(m)
    f_samples = np.asarray(spec.f(t, x, u_samples), dtype=float)
    if f_samples.shape != u_samples.shape:
        f_samples = np.broadcast_to(f_samples, u_samples.shape)
    return w * coeffs_from_samples(f_samples, n)


def grad_h(spec: NonlinearitySpec, t: float, u: PhaseVector, m: int) -> PhaseVector:
    """Gradient of h_t at u: plus-part lambda_j^{-1/2} <f(t,., u), phi_j>, minus part 0.

    ||grad_h||_E <= C0 holds for every input (discrete Parseval).
    """
    _check_m(u.n, m)
    ga = grad_h_arrays(spec, t, u.a, m)
    return PhaseVector(u.n, ga, np.zeros_like(ga))


def grad_h_trunc_arrays(
    spec: NonlinearitySpec, t: float, a: np.ndarray, n: int, m: int
) -> np.ndarray:
    """Truncated gradient on arrays: restrict input to |j| <= n, evaluate, restrict."""
    order = (a.shape[-1] - 1) // 2
    if n > order:
        raise ValueError(f"truncation {n} exceeds state order {order}")
    j = np.arange(-order, order + 1)
    mask = np.abs(j) <= n
    ga = grad_h_arrays(spec, t, np.where(mask, a, 0.0), m)
    return np.where(mask, ga, 0.0)


def grad_h_trunc(
    spec: NonlinearitySpec, t: float, u: PhaseVector, n: int, m: int
) -> PhaseVector:
    """Galerkin-truncated gradient: project(grad_h(project(u, low n)), low n)."""
    _check_m(u.n, m)
    inner = grad_h(spec, t, project(u, "low", n), m)
    return project(inner, "low", n)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(32)


def _potential_samples(spec: NonlinearitySpec, t: float, x, u_samples: np.ndarray) -> np.ndarray:
    if spec.F is not None:
        return np.asarray(spec.F(t, x, u_samples), dtype=float)
    # F(u) = int_0^u f = u * int_0^1 f(t, x, u s) ds by Gauss-Legendre in s.
    s = 0.5 * (_GL_NODES + 1.0)
    w = 0.5 * _GL_WEIGHTS
    acc = np.zeros_like(u_samples)
    for sk, wk in zip(s, w):
        acc += wk * np.asarray(spec.f(t, x, u_samples * sk), dtype=float)
    return u_samples * acc


def h_value_arrays(spec: NonlinearitySpec, t: float, a: np.ndarray, m: int) -> np.ndarray:
    n = (a.shape[-1] - 1) // 2
    w = lambda_weights(n) ** -0.5
    u_samples = samples_from_coeffs(a * w, m)
    x = grid_points(m)
    F = _potential_samples(spec, t, x, u_samples)
    return np.mean(F, axis=-1)


def h_value(spec: NonlinearitySpec, t: float, u: PhaseVector, m: int) -> float:
    """h_t(u) = (1/m) sum_i F(t, x_i, u(x_i)); grad_h is its exact gradient.

    The quadrature matches the one inside grad_h, so central finite
    differences of h_value reproduce <grad_h, direction> to FD accuracy.
    """
    _check_m(u.n, m)
    return float(h_value_arrays(spec, t, u.a, m))
