"""Smallest enclosing ball in general dimension."""

import sys

import numpy as np
import pytest
from scipy.optimize import linprog

from camel_lab.minball import Ball, min_enclosing_ball


class TestSmallCases:
    def test_single_point(self):
        ball = min_enclosing_ball(np.array([[2.0, -1.0]]))
        np.testing.assert_allclose(ball.center, [2.0, -1.0])
        assert ball.radius == 0.0

    def test_two_points(self):
        ball = min_enclosing_ball(np.array([[0.0, 0.0], [2.0, 0.0]]))
        np.testing.assert_allclose(ball.center, [1.0, 0.0], atol=1e-12)
        assert ball.radius == pytest.approx(1.0, abs=1e-12)

    def test_square_corners(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        ball = min_enclosing_ball(pts)
        np.testing.assert_allclose(ball.center, [0.5, 0.5], atol=1e-9)
        assert ball.radius == pytest.approx(np.sqrt(0.5), abs=1e-9)

    def test_obtuse_triangle_uses_diameter(self):
        # circumcenter falls outside; the two far points span the ball
        pts = np.array([[0.0, 0.0], [4.0, 0.0], [2.0, 0.1]])
        ball = min_enclosing_ball(pts)
        np.testing.assert_allclose(ball.center, [2.0, 0.0], atol=1e-9)
        assert ball.radius == pytest.approx(2.0, abs=1e-9)

    def test_duplicates_and_collinear(self):
        pts = np.array([[1.0, 1.0], [1.0, 1.0], [3.0, 1.0], [2.0, 1.0]])
        ball = min_enclosing_ball(pts)
        np.testing.assert_allclose(ball.center, [2.0, 1.0], atol=1e-9)
        assert ball.radius == pytest.approx(1.0, abs=1e-9)

    def test_interior_points_ignored(self):
        rng = np.random.default_rng(0)
        inner = rng.normal(0, 0.1, (50, 2))
        pts = np.vstack([inner, [[5.0, 0.0], [-5.0, 0.0]]])
        ball = min_enclosing_ball(pts)
        np.testing.assert_allclose(ball.center, [0.0, 0.0], atol=1e-9)
        assert ball.radius == pytest.approx(5.0, abs=1e-9)


def _check_optimality(pts, ball, tol=1e-7):
    # containment
    d = np.linalg.norm(pts - ball.center, axis=-1)
    assert np.all(d <= ball.radius + tol)
    # support points (stored as coordinate tuples) on the boundary
    sup = np.asarray(ball.support, dtype=float)
    sd = np.linalg.norm(sup - ball.center, axis=-1)
    assert np.all(np.abs(sd - ball.radius) <= 1e-6 * max(1.0, ball.radius))
    # optimality: the center lies in the convex hull of the support set
    # (otherwise the ball could shrink by moving the center)
    A_eq = np.vstack([sup.T, np.ones(len(sup))])
    b_eq = np.concatenate([ball.center, [1.0]])
    res = linprog(
        np.zeros(len(sup)), A_eq=A_eq, b_eq=b_eq,
        bounds=[(0, None)] * len(sup), method="highs",
    )
    assert res.success


class TestRandomClouds:
    @pytest.mark.parametrize("dim", [1, 2, 3, 5])
    def test_kkt_certificate(self, dim):
        rng = np.random.default_rng(dim)
        pts = rng.normal(0, 1, (60, dim))
        ball = min_enclosing_ball(pts)
        _check_optimality(pts, ball)

    def test_points_on_sphere(self):
        rng = np.random.default_rng(11)
        pts = rng.normal(0, 1, (40, 3))
        pts /= np.linalg.norm(pts, axis=-1, keepdims=True)
        ball = min_enclosing_ball(pts)
        assert ball.radius <= 1.0 + 1e-9
        _check_optimality(pts, ball)

    def test_determinism_and_uniqueness(self):
        rng = np.random.default_rng(5)
        pts = rng.normal(0, 2, (100, 4))
        b1 = min_enclosing_ball(pts, seed=0)
        b2 = min_enclosing_ball(pts, seed=0)
        assert b1.radius == b2.radius
        np.testing.assert_array_equal(b1.center, b2.center)
        # the ball itself is unique regardless of the shuffle
        b3 = min_enclosing_ball(pts, seed=99)
        assert b3.radius == pytest.approx(b1.radius, rel=1e-9)
        np.testing.assert_allclose(b3.center, b1.center, atol=1e-9)

    def test_large_cloud_recursion_safe(self):
        before = sys.getrecursionlimit()
        rng = np.random.default_rng(8)
        pts = rng.normal(0, 1, (1500, 3))
        ball = min_enclosing_ball(pts)
        assert sys.getrecursionlimit() == before
        d = np.linalg.norm(pts - ball.center, axis=-1)
        assert np.all(d <= ball.radius + 1e-7)

    def test_contains_method(self):
        pts = np.array([[0.0, 0.0], [1.0, 0.0]])
        ball = min_enclosing_ball(pts)
        assert ball.contains([0.5, 0.0])
        assert not ball.contains([2.0, 0.0])
