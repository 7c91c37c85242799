"""Diagonal string-equation operators and the exact linear flow.

In basis coefficients the linear part of the string equation decouples into
independent 2x2 systems per mode j:

    d/dt a_j = lambda_j b_j
    d/dt b_j = -(lambda_j - 1/lambda_j) a_j

with lambda_j = sqrt(j^2 + 1).  Since lambda_j^2 - 1 = j^2 the solution is a
rotation-like block of frequency j for j != 0 and a shear for j = 0; both are
area-preserving, so the full flow exp(tJA) is symplectic mode by mode.

The block's off-diagonal signs are fixed by this ODE (not by any particular
matrix display convention); validated against an adaptive ODE oracle in the
test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .phase_space import PhaseVector, lambda_weights

__all__ = [
    "LinearBlock",
    "lam",
    "apply_diag",
    "apply_J",
    "exp_block",
    "apply_exp_tJA",
    "group_norm_bound",
    "exp_coeff_arrays",
]


def lam(j: int) -> float:
    """Frequency weight lambda_j = sqrt(j^2 + 1); even in j, always >= 1."""
    return math.sqrt(float(j) ** 2 + 1.0)


@dataclass(frozen=True)
class LinearBlock:
    """2x2 block of the linear flow on the (a_j, b_j) plane; det = 1."""

    j: int
    t: float
    m11: float
    m12: float
    m21: float
    m22: float

    def matrix(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]])

    def det(self) -> float:
        return self.m11 * self.m22 - self.m12 * self.m21


def exp_block(j: int, t: float) -> LinearBlock:
    """Exact time-t flow of the mode-j linear system.

    j != 0: [[cos jt, (lambda_j/j) sin jt], [-(j/lambda_j) sin jt, cos jt]];
    j == 0: the shear [[1, t], [0, 1]].
    """
    if j == 0:
        return LinearBlock(0, t, 1.0, t, 0.0, 1.0)
    lj = lam(j)
    c = math.cos(j * t)
    s = math.sin(j * t)
    return LinearBlock(j, t, c, (lj / j) * s, -(j / lj) * s, c)


_OPS = ("B", "Binv", "A")


def _diag_factors(op: str, n: int) -> tuple[np.ndarray, np.ndarray]:
    lj = lambda_weights(n)
    if op == "B":
        return lj, lj
    if op == "Binv":
        return 1.0 / lj, 1.0 / lj
    if op == "A":
        return lj - 1.0 / lj, lj
    raise ValueError(f"op must be one of {_OPS}, got {op!r}")


def apply_diag(op: str, u: PhaseVector) -> PhaseVector:
    """Apply B, Binv, or A mode-diagonally.

    B scales a_j and b_j by lambda_j; Binv by 1/lambda_j; A scales a_j by
    lambda_j - 1/lambda_j and b_j by lambda_j.
    """
    fa, fb = _diag_factors(op, u.n)
    return PhaseVector(u.n, fa * u.a, fb * u.b)


def apply_J(u: PhaseVector) -> PhaseVector:
    """Complex structure on coefficients: (a_j, b_j) -> (b_j, -a_j); J^2 = -1."""
    return PhaseVector(u.n, u.b.copy(), -u.a)


@lru_cache(maxsize=256)
def exp_coeff_arrays(n: int, t: float) -> tuple[np.ndarray, ...]:
    """Per-mode block entries (m11, m12, m21, m22) as arrays over j = -n..n.

    Cached for repeated fixed-step integration; entries are read-only.
    """
    j = np.arange(-n, n + 1, dtype=float)
    lj = np.sqrt(j**2 + 1.0)
    c = np.cos(j * t)
    s = np.sin(j * t)
    # sin(jt)/j -> t as j -> 0 covers the shear's corner entry exactly.
    with np.errstate(invalid="ignore", divide="ignore"):
        s_over_j = np.where(j != 0.0, s / np.where(j != 0.0, j, 1.0), t)
    m11 = c.copy()
    m12 = lj * s_over_j
    m21 = -(j / lj) * s
    m22 = c.copy()
    m11[n] = 1.0
    m22[n] = 1.0
    for arr in (m11, m12, m21, m22):
        arr.setflags(write=False)
    return m11, m12, m21, m22


def apply_exp_tJA_arrays(a: np.ndarray, b: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Block application on raw coefficient arrays of shape (..., 2n+1)."""
    n = (a.shape[-1] - 1) // 2
    m11, m12, m21, m22 = exp_coeff_arrays(n, float(t))
    return m11 * a + m12 * b, m21 * a + m22 * b


def apply_exp_tJA(u: PhaseVector, t: float) -> PhaseVector:
    """Exact linear flow exp(tJA); a symplectic group in t, mode-diagonal."""
    a, b = apply_exp_tJA_arrays(u.a, u.b, t)
    return PhaseVector(u.n, a, b)


def _block_norm(m11: float, m12: float, m21: float, m22: float) -> float:
    # Largest singular value of a 2x2 matrix, in closed form.
    fro2 = m11**2 + m12**2 + m21**2 + m22**2
    det = m11 * m22 - m12 * m21
    gap = math.sqrt(max(fro2**2 - 4.0 * det**2, 0.0))
    return math.sqrt((fro2 + gap) / 2.0)


def group_norm_bound(t: float, n_max: int) -> float:
    """max over |j| <= n_max of the operator norm of exp_block(j, t).

    The j = 0 shear makes this grow linearly in |t|; blocks approach
    rotations (norm -> 1) as |j| grows, so the max stabilizes in n_max.
    """
    best = 0.0
    for j in range(0, n_max + 1):
        blk = exp_block(j, t)
        best = max(best, _block_norm(blk.m11, blk.m12, blk.m21, blk.m22))
    return best
