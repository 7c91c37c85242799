"""Smallest enclosing ball in general dimension (Welzl's algorithm).

Move-to-front variant; the support set has at most d+1 points and the solver
for a fixed support reduces to a small linear system for the circumcenter
restricted to the support's affine hull.  The optimal center is a convex
combination of the support points, all of which lie on the boundary.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

import numpy as np

__all__ = ["Ball", "min_enclosing_ball"]

_EPS = 1e-10


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float
    support: tuple

    def contains(self, point, tol: float = _EPS) -> bool:
        return float(np.linalg.norm(np.asarray(point, float) - self.center)) <= (
            self.radius + tol
        )


def _circumsphere(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Smallest sphere through the given (near) affinely independent points."""
    q0 = points[0]
    if len(points) == 1:
        return q0.copy(), 0.0
    D = points[1:] - q0  # rows span the affine hull
    # Center = q0 + D^T y where 2 D D^T y = |rows|^2 (equidistance conditions).
    G = 2.0 * (D @ D.T)
    rhs = np.sum(D * D, axis=1)
    y = np.linalg.lstsq(G, rhs, rcond=None)[0]
    center = q0 + D.T @ y
    radius = float(np.linalg.norm(center - q0))
    return center, radius


def min_enclosing_ball(points, seed: int = 0, tol: float = _EPS) -> Ball:
    """Exact smallest enclosing ball of a finite point set.

    Input order does not matter; a seeded shuffle gives the expected
    near-linear running time.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or len(pts) == 0:
        raise ValueError("points must be a non-empty (count, dim) array")
    if not np.all(np.isfinite(pts)):
        raise ValueError("points must be finite")
    rng = np.random.default_rng(seed)
    pts = pts[rng.permutation(len(pts))]
    dim = pts.shape[1]

    def welzl(limit: int, boundary: list) -> tuple[np.ndarray, float, list]:
        if limit == 0 or len(boundary) == dim + 1:
            if not boundary:
                return pts[0].copy(), -1.0, []
            c, r = _circumsphere(np.asarray(boundary, dtype=float))
            return c, r, list(boundary)
        i = limit - 1
        c, r, sup = welzl(i, boundary)
        if r >= 0 and np.linalg.norm(pts[i] - c) <= r + tol:
            return c, r, sup
        return welzl(i, boundary + [pts[i]])

    # The first descent chain of the recursion always reaches depth `limit`.
    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 3 * len(pts) + 1000))
    try:
        center, radius, sup = welzl(len(pts), [])
    finally:
        sys.setrecursionlimit(old_limit)
    if radius < 0:
        center, radius, sup = pts[0].copy(), 0.0, [pts[0]]
    support = tuple(map(tuple, sup))
    return Ball(center=center, radius=float(radius), support=support)
