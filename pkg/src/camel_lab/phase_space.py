"""Truncated phase-space vectors on the periodic string's symplectic basis.

States live in the energy space E spanned by the orthonormal pairs
(phi_j^+, phi_j^-), j = -n..n, built from the trigonometric basis

    phi_0(x) = 1,  phi_j(x) = sqrt(2) sin(jx) (j > 0),
    phi_j(x) = sqrt(2) cos(|j|x) (j < 0)

with the 1/2pi-normalized inner product on [0, 2pi).  The basis pair for
mode j carries the weight lambda_j^{-1/2}, lambda_j = sqrt(j^2 + 1), so the
E-norm of a state is the plain Euclidean norm of its coefficient arrays.

A PhaseVector stores the coefficients (a_j, b_j) of a truncated state; the
grid transforms move between coefficients and equispaced samples of the
underlying pair (u(x), v(x)) with

    u(x) = sum_j a_j lambda_j^{-1/2} phi_j(x)
    v(x) = -sum_j b_j lambda_j^{-1/2} phi_j(x).

Coefficient arrays are ordered j = -n..n contiguously (index j + n).
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

__all__ = [
    "PhaseVector",
    "GridFunction",
    "make_state",
    "zero_state",
    "basis_state",
    "e_norm",
    "f_theta_norm",
    "symplectic_form",
    "project",
    "to_grid",
    "from_grid",
    "mode_amplitude",
    "save_state",
    "load_state",
    "lambda_weights",
    "coeffs_from_samples",
    "samples_from_coeffs",
    "grid_points",
]


def _readonly(arr: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(arr, dtype=float)
    if out is arr:
        out = out.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PhaseVector:
    """Truncated state: coefficients a (plus part) and b (minus part).

    Arrays have length 2n+1, entry i holding the coefficient of mode
    j = i - n.  Instances are immutable; arithmetic returns new vectors,
    zero-padding to the larger order when orders differ.
    """

    n: int
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        if self.n < 0:
            raise ValueError(f"truncation order must be >= 0, got {self.n}")
        k = 2 * self.n + 1
        a = np.asarray(self.a, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if a.shape != (k,) or b.shape != (k,):
            raise ValueError(
                f"coefficient arrays must have shape ({k},), "
                f"got {a.shape} and {b.shape}"
            )
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("coefficient arrays must be finite")
        object.__setattr__(self, "a", _readonly(a))
        object.__setattr__(self, "b", _readonly(b))

    def coeff(self, j: int, part: str = "a") -> float:
        """Coefficient of mode j on the plus ('a') or minus ('b') part."""
        if abs(j) > self.n:
            raise IndexError(f"mode {j} outside truncation order {self.n}")
        arr = self.a if part == "a" else self.b
        return float(arr[j + self.n])

    def pad_to(self, n: int) -> "PhaseVector":
        if n < self.n:
            raise ValueError(f"cannot pad order {self.n} down to {n}")
        if n == self.n:
            return self
        extra = n - self.n
        return PhaseVector(
            n,
            np.pad(self.a, (extra, extra)),
            np.pad(self.b, (extra, extra)),
        )

    def __add__(self, other: "PhaseVector") -> "PhaseVector":
        n = max(self.n, other.n)
        u, v = self.pad_to(n), other.pad_to(n)
        return PhaseVector(n, u.a + v.a, u.b + v.b)

    def __sub__(self, other: "PhaseVector") -> "PhaseVector":
        n = max(self.n, other.n)
        u, v = self.pad_to(n), other.pad_to(n)
        return PhaseVector(n, u.a - v.a, u.b - v.b)

    def __mul__(self, c: float) -> "PhaseVector":
        return PhaseVector(self.n, c * self.a, c * self.b)

    __rmul__ = __mul__

    def __neg__(self) -> "PhaseVector":
        return PhaseVector(self.n, -self.a, -self.b)


@dataclass(frozen=True)
class GridFunction:
    """Equispaced samples of the pair (u, v) at x_i = 2*pi*i/m."""

    m: int
    u_samples: np.ndarray
    v_samples: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u_samples, dtype=float)
        v = np.asarray(self.v_samples, dtype=float)
        if u.shape != (self.m,) or v.shape != (self.m,):
            raise ValueError("sample arrays must have length m")
        object.__setattr__(self, "u_samples", _readonly(u))
        object.__setattr__(self, "v_samples", _readonly(v))


def make_state(n: int, a=None, b=None) -> PhaseVector:
    """Build a PhaseVector of order n.

    a and b are either full coefficient arrays of length 2n+1 or sparse
    mappings {j: value}; omitted parts are zero.
    """

    def expand(part):
        if part is None:
            return np.zeros(2 * n + 1)
        if isinstance(part, dict):
            out = np.zeros(2 * n + 1)
            for j, val in part.items():
                if abs(j) > n:
                    raise IndexError(f"mode {j} outside truncation order {n}")
                out[j + n] = val
            return out
        return np.asarray(part, dtype=float)

    return PhaseVector(n, expand(a), expand(b))


def zero_state(n: int) -> PhaseVector:
    k = 2 * n + 1
    return PhaseVector(n, np.zeros(k), np.zeros(k))


def basis_state(n: int, j: int, part: str = "+") -> PhaseVector:
    """The basis vector phi_j^+ (part '+') or phi_j^- (part '-') at order n."""
    if abs(j) > n:
        raise IndexError(f"mode {j} outside truncation order {n}")
    k = 2 * n + 1
    a = np.zeros(k)
    b = np.zeros(k)
    if part == "+":
        a[j + n] = 1.0
    elif part == "-":
        b[j + n] = 1.0
    else:
        raise ValueError(f"part must be '+' or '-', got {part!r}")
    return PhaseVector(n, a, b)


def mode_numbers(n: int) -> np.ndarray:
    return np.arange(-n, n + 1)


def lambda_weights(n: int) -> np.ndarray:
    """lambda_j = sqrt(j^2 + 1) for j = -n..n."""
    j = mode_numbers(n)
    return np.sqrt(j.astype(float) ** 2 + 1.0)


def e_norm(u: PhaseVector) -> float:
    """Energy-space norm; equals the Euclidean norm of (a, b)."""
    return float(np.sqrt(np.dot(u.a, u.a) + np.dot(u.b, u.b)))


def f_theta_norm(u: PhaseVector, theta: float) -> float:
    """Weaker-norm diagnostic: sqrt(sum lambda_j^(-2 theta) (a_j^2 + b_j^2)).

    theta must lie in (0, 1/2).  Converges to e_norm as theta -> 0.
    """
    if not 0.0 < theta < 0.5:
        raise ValueError(f"theta must lie in (0, 1/2), got {theta}")
    w = lambda_weights(u.n) ** (-2.0 * theta)
    return float(np.sqrt(np.dot(w, u.a**2 + u.b**2)))


def symplectic_form(xi: PhaseVector, eta: PhaseVector) -> float:
    """omega(xi, eta) = sum_j (a_j(xi) b_j(eta) - b_j(xi) a_j(eta)).

    Mixed orders are zero-padded to the larger one.
    """
    n = max(xi.n, eta.n)
    x, y = xi.pad_to(n), eta.pad_to(n)
    return float(np.dot(x.a, y.b) - np.dot(x.b, y.a))


_REGIONS = ("low", "plus", "minus", "tail")


def project(u: PhaseVector, region: str, k: int) -> PhaseVector:
    """Project onto a coefficient region, zeroing everything else.

    low(k):   keep a_j, b_j for |j| <= k
    plus(k):  keep a_j for |j| >= k+1
    minus(k): keep b_j for |j| >= k+1
    tail(n):  keep a_j, b_j for |j| > n

    low(k) + plus(k) + minus(k) is the identity decomposition.
    """
    if region not in _REGIONS:
        raise ValueError(f"region must be one of {_REGIONS}, got {region!r}")
    if not 0 <= k <= u.n:
        raise ValueError(f"k must lie in [0, {u.n}], got {k}")
    j = mode_numbers(u.n)
    low = np.abs(j) <= k
    a = np.array(u.a)
    b = np.array(u.b)
    if region == "low":
        a[~low] = 0.0
        b[~low] = 0.0
    elif region == "plus":
        a[low] = 0.0
        b[:] = 0.0
    elif region == "minus":
        a[:] = 0.0
        b[low] = 0.0
    else:  # tail
        a[low] = 0.0
        b[low] = 0.0
    return PhaseVector(u.n, a, b)


def _check_grid(n: int, m: int) -> None:
    if m < 4 * (n + 1):
        raise ValueError(f"grid size {m} too small for order {n}; need m >= {4 * (n + 1)}")
    if m & (m - 1) != 0:
        raise ValueError(f"grid size must be a power of two, got {m}")


def grid_points(m: int) -> np.ndarray:
    """The sample points x_i = 2*pi*i/m."""
    return 2.0 * np.pi * np.arange(m) / m


def samples_from_coeffs(c: np.ndarray, m: int) -> np.ndarray:
    """Evaluate sum_j c_j phi_j(x) at the m grid points (batched on the last axis).

    c has shape (..., 2n+1); the result has shape (..., m).  Exact for
    m > 2n (the synthesis is band-limited).
    """
    c = np.asarray(c, dtype=float)
    k = c.shape[-1]
    n = (k - 1) // 2
    if m <= 2 * n:
        raise ValueError(f"m={m} cannot represent modes up to {n}")
    spec = np.zeros(c.shape[:-1] + (m // 2 + 1,), dtype=complex)
    spec[..., 0] = m * c[..., n]
    if n > 0:
        cos_part = c[..., n - 1 :: -1]  # j = -1..-n -> frequencies 1..n
        sin_part = c[..., n + 1 :]  # j = 1..n
        spec[..., 1 : n + 1] = (m / 2.0) * np.sqrt(2.0) * (cos_part - 1j * sin_part)
    return np.fft.irfft(spec, n=m, axis=-1)


def coeffs_from_samples(samples: np.ndarray, n: int) -> np.ndarray:
    """Discrete coefficients c_j = (1/m) sum_i f(x_i) phi_j(x_i), |j| <= n.

    samples has shape (..., m); the result has shape (..., 2n+1).  Exact on
    data band-limited below m/2 by discrete orthogonality of the basis.
    """
    samples = np.asarray(samples, dtype=float)
    m = samples.shape[-1]
    if m <= 2 * n:
        raise ValueError(f"m={m} cannot resolve modes up to {n}")
    spec = np.fft.rfft(samples, axis=-1)
    c = np.zeros(samples.shape[:-1] + (2 * n + 1,))
    c[..., n] = spec[..., 0].real / m
    if n > 0:
        c[..., n - 1 :: -1] = np.sqrt(2.0) * spec[..., 1 : n + 1].real / m
        c[..., n + 1 :] = -np.sqrt(2.0) * spec[..., 1 : n + 1].imag / m
    return c


def to_grid(u: PhaseVector, m: int) -> GridFunction:
    """Sample (u(x), v(x)) on m equispaced points; m a power of two >= 4(n+1)."""
    _check_grid(u.n, m)
    w = lambda_weights(u.n) ** -0.5
    u_samples = samples_from_coeffs(u.a * w, m)
    v_samples = -samples_from_coeffs(u.b * w, m)
    return GridFunction(m, u_samples, v_samples)


def from_grid(g: GridFunction, n: int) -> PhaseVector:
    """Invert to_grid on band-limited data; exact for order-n content."""
    _check_grid(n, g.m)
    w = lambda_weights(n) ** 0.5
    a = w * coeffs_from_samples(g.u_samples, n)
    b = -w * coeffs_from_samples(g.v_samples, n)
    return PhaseVector(n, a, b)


def mode_amplitude(u: PhaseVector, l: int) -> float:
    """|U_l| = sqrt(a_l^2 + b_l^2), the modulus of mode l's complex coordinate."""
    if abs(l) > u.n:
        raise IndexError(f"mode {l} outside truncation order {u.n}")
    return float(np.hypot(u.a[l + u.n], u.b[l + u.n]))


def save_state(u: PhaseVector, path) -> None:
    """Write CSV rows `j,a_j,b_j` with a `# order=n` header; exact round-trip."""
    text = state_to_csv(u)
    if hasattr(path, "write"):
        path.write(text)
    else:
        with open(path, "w", encoding="ascii") as fh:
            fh.write(text)


def state_to_csv(u: PhaseVector) -> str:
    lines = [f"# order={u.n}", "j,a_j,b_j"]
    for i, j in enumerate(mode_numbers(u.n)):
        lines.append(f"{j},{u.a[i]:.17g},{u.b[i]:.17g}")
    return "\n".join(lines) + "\n"


def load_state(path) -> PhaseVector:
    """Read a PhaseVector written by save_state."""
    if hasattr(path, "read"):
        text = path.read()
    else:
        with open(path, "r", encoding="ascii") as fh:
            text = fh.read()
    return state_from_csv(text)


def state_from_csv(text: str) -> PhaseVector:
    fh = io.StringIO(text)
    header = fh.readline().strip()
    if not header.startswith("# order="):
        raise ValueError(f"missing '# order=' header, got {header!r}")
    n = int(header.split("=", 1)[1])
    k = 2 * n + 1
    a = np.zeros(k)
    b = np.zeros(k)
    seen = 0
    for line in fh:
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("j,"):
            continue
        j_str, a_str, b_str = line.split(",")
        j = int(j_str)
        if abs(j) > n:
            raise ValueError(f"mode {j} outside declared order {n}")
        a[j + n] = float(a_str)
        b[j + n] = float(b_str)
        seen += 1
    if seen != k:
        raise ValueError(f"expected {k} coefficient rows, found {seen}")
    return PhaseVector(n, a, b)
