"""Acceptance gate: every shipped guarantee, one pass/fail line each.

Each test measures its own wall time, prints a single summary line, and
records it for the terminal summary (see conftest.py).  Tolerances and
budgets are part of the guarantee and are asserted, not just reported.
"""

import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

import camel_lab as cl


def _report(request, num, ok, elapsed, limit, detail):
    verdict = "PASS" if ok else "FAIL"
    line = f"criterion {num:2d}: {verdict} ({elapsed:6.1f}s / {limit:.0f}s) {detail}"
    store = getattr(request.config, "_criterion_lines", None)
    if store is None:
        store = []
        request.config._criterion_lines = store
    store.append(line)
    print(line)
    assert ok, line
    assert elapsed < limit, line


def test_criterion_1_linear_flow_oracle(request):
    """exp_block vs adaptive integration, |j| <= 64, six times, err < 1e-10."""
    start = time.time()
    js = np.arange(-64, 65)
    lam = np.sqrt(js.astype(float) ** 2 + 1.0)
    kap = lam - 1.0 / lam

    def rhs(t, y):
        Y = y.reshape(len(js), 2, 2)
        out = np.empty_like(Y)
        out[:, 0, :] = lam[:, None] * Y[:, 1, :]
        out[:, 1, :] = -kap[:, None] * Y[:, 0, :]
        return out.ravel()

    y0 = np.tile(np.eye(2), (len(js), 1, 1)).ravel()
    worst = 0.0
    for t in (0.1, -0.1, 1.0, -1.0, 10.0, -10.0):
        sol = solve_ivp(rhs, (0.0, t), y0, method="DOP853",
                        rtol=1e-13, atol=1e-15, t_eval=[t])
        Y = sol.y[:, -1].reshape(len(js), 2, 2)
        for i, j in enumerate(js):
            err = np.max(np.abs(cl.exp_block(int(j), t).matrix() - Y[i]))
            worst = max(worst, float(err))
    elapsed = time.time() - start
    _report(request, 1, worst < 1e-10, elapsed, 10,
            f"linear-flow oracle max err {worst:.2e} (tol 1e-10)")


def test_criterion_2_strang_step_symplectic(request):
    """D^T Omega D = Omega within 1e-6 relative on 100 random states."""
    start = time.time()
    spec = cl.sine_gordon()
    step = cl.make_strang_step_map(spec, 0.0, 1e-2, 16, 128, 16)
    omega = cl.symplectic_matrix_state(16)
    scale = np.max(np.abs(omega))
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        z = rng.normal(0.0, 0.5, 66)
        D = cl.jacobian_fd(step, z, 1e-6)
        rel = float(np.max(np.abs(D.T @ omega @ D - omega)) / scale)
        worst = max(worst, rel)
    elapsed = time.time() - start
    _report(request, 2, worst < 1e-6, elapsed, 60,
            f"symplecticity worst relative defect {worst:.2e} (tol 1e-6)")


def test_criterion_3_mild_solution_consistency(request):
    """Strang order 2.0 +/- 0.1 against the Picard reference; finest < 1e-5."""
    start = time.time()
    spec = cl.sine_gordon()
    n, m, t_end = 8, 64, 1.0
    rng = np.random.default_rng(2024)
    w = cl.lambda_weights(n)
    a = rng.normal(0, 1, 2 * n + 1) * w**-2.0
    b = rng.normal(0, 1, 2 * n + 1) * w**-2.0
    u0 = cl.PhaseVector(n, a, b)
    u0 = u0 * (1.0 / cl.e_norm(u0))
    ref = cl.picard_mild(u0, t_end, spec, n, m, tol=1e-10)
    errs = []
    for dt in (1e-2, 5e-3, 2.5e-3):
        cfg = cl.FlowConfig(dt=dt, n=n, m=m, t1=t_end)
        errs.append(cl.e_norm(cl.flow(u0, cfg, spec).states[-1] - ref))
    orders = [float(np.log2(errs[i] / errs[i + 1])) for i in range(2)]
    elapsed = time.time() - start
    ok = all(abs(o - 2.0) <= 0.1 for o in orders) and errs[-1] < 1e-5
    _report(request, 3, ok, elapsed, 120,
            f"strang orders {orders[0]:.3f}/{orders[1]:.3f} (want 2.0+-0.1), "
            f"finest err {errs[-1]:.2e} (tol 1e-5)")


def test_criterion_4_gradient_bound(request):
    """e_norm(grad h) <= 1 on 10^3 random states, zero violations."""
    start = time.time()
    spec = cl.sine_gordon()
    violations = 0
    worst = 0.0
    rng = np.random.default_rng(123)
    for radius, t in ((0.5, 0.0), (2.0, 0.4), (10.0, -1.1)):
        a, _ = cl.sample_ball_coeffs(32, radius, 334, rng)
        g = cl.grad_h_arrays(spec, t, a, 256)
        norms = np.linalg.norm(g, axis=-1)
        violations += int(np.sum(norms > 1.0))
        worst = max(worst, float(norms.max()))
    elapsed = time.time() - start
    _report(request, 4, violations == 0, elapsed, 30,
            f"gradient bound max {worst:.6f} <= 1, {violations} violations "
            f"over 1002 states")


def test_criterion_5_galerkin_convergence(request):
    """Epsilon curve strictly decreasing with eps(64) < eps(4)/10."""
    start = time.time()
    rep = cl.epsilon_curve(cl.sine_gordon(), R=2.0, T=1.0,
                           n_values=(4, 8, 16, 32, 64),
                           samples=200, seed=0, N_probe=128, m=512)
    iso = rep.isotonic_errors
    strict = all(x > y for x, y in zip(iso, iso[1:]))
    ratio = iso[-1] / iso[0]
    elapsed = time.time() - start
    _report(request, 5, strict and ratio < 0.1, elapsed, 300,
            f"epsilon strictly decreasing={strict}, eps(64)/eps(4)={ratio:.4f} "
            f"(need < 0.1)")


def test_criterion_6_camel_bound(request):
    """Certified bound 1.5/(2-e^0.2) holds at every found camel point."""
    start = time.time()
    sys = cl.coupled_oscillator()
    assert sys.certificate == (0.5, 1.0)
    t = 0.2
    fiber_box = cl.camel_fiber_bound(sys.certificate, 1.0, t)
    cyl = cl.CoisotropicCylinder(n=2, k=1, base=cl.BallBase(1.0, 1),
                                 fiber_box=fiber_box)
    fl = cl.flow_map(sys, t, 1e-3)
    pts = cl.find_camel_points(fl, cyl, t, tol=1e-8, multistart=64, seed=0)
    verified = cl.verify_camel_bisection(fl, pts)
    report = cl.camel_bound_check(sys, cyl, t, pts)
    bound = 1.5 / (2.0 - np.exp(0.2))
    ok = (
        len(pts) > 0
        and bool(verified.all())
        and report.passed
        and report.max_norm <= bound * 1.01
        and len(report.norm_violations) == 0
    )
    elapsed = time.time() - start
    _report(request, 6, ok, elapsed, 120,
            f"{len(pts)} camel points, max |z|={report.max_norm:.4f} <= "
            f"{bound:.4f}*1.01, all bisection-verified={bool(verified.all())}")


def test_criterion_7_displacement_demo(request):
    """10^5 slab samples all displaced; energy bound equals 2 sup f."""
    start = time.time()
    rep = cl.displacement_demo(samples=100_000, seed=0)
    ok = rep.passed and rep.violations == 0 and rep.energy_bound == 2.0
    elapsed = time.time() - start
    _report(request, 7, ok, elapsed, 10,
            f"displacement violations {rep.violations}/100000, "
            f"min margin {rep.min_margin:.2e}, energy bound {rep.energy_bound}")


def test_criterion_8_hamiltonian_algebra(request):
    """Composition and inversion identities, pointwise < 1e-6 on 50 points."""
    start = time.time()
    sys_h = cl.coupled_oscillator()
    sys_k = cl.harmonic_oscillator(4)
    rng = np.random.default_rng(42)
    pts = rng.uniform(-1.5, 1.5, (50, 4))
    err_comp = cl.verify_composition(sys_h, sys_k, 1.0, pts, dt=1e-3)
    err_inv = cl.verify_inverse(sys_h, 1.0, pts, dt=1e-3)
    ok = err_comp < 1e-6 and err_inv < 1e-6
    elapsed = time.time() - start
    _report(request, 8, ok, elapsed, 60,
            f"composition err {err_comp:.2e}, inverse err {err_inv:.2e} "
            f"(tol 1e-6)")


def test_criterion_9_non_squeezing_witness(request):
    """Reduced mode-1 image cloud needs an enclosing radius >= 0.9."""
    start = time.time()
    spec = cl.sine_gordon()
    cfg = cl.FlowConfig(dt=1e-2, n=16, m=128, scheme="strang")
    res = cl.maximize_mode(spec, 1, 1, 1.0, 1.0, cfg, budget=256, seed=0)
    ball = cl.min_enclosing_ball(res.reduced_points)
    ok = ball.radius >= 0.9
    elapsed = time.time() - start
    _report(request, 9, ok, elapsed, 600,
            f"reduced-cloud enclosing radius {ball.radius:.4f} >= 0.9, "
            f"best |U_1(1)| = {res.best_value:.4f}, 256 starts")


def test_criterion_10_oracle_self_consistency(request):
    """c <= gamma, exact lambda^2 scaling, coisotropic entries zero."""
    start = time.time()
    table = cl.capacity_table()
    ok = all(e.c_value <= e.gamma_value + 1e-15 for e in table)
    for shape, kw in (("ball", {"r": 0.75, "n": 2}),
                      ("cylinder", {"r": 0.75, "n": 3}),
                      ("torus", {"r": 0.75, "m": 2})):
        small = cl.capacity_oracle(shape, **kw)
        kw2 = dict(kw, r=2.0 * kw["r"])
        big = cl.capacity_oracle(shape, **kw2)
        ok = ok and big.c_value == 4.0 * small.c_value
        ok = ok and big.gamma_value == 4.0 * small.gamma_value
    coiso = cl.capacity_oracle("coisotropic", k=1, n=3)
    ok = ok and coiso.c_value == 0.0 and coiso.gamma_value == 0.0
    ok = ok and any(e.shape == "coisotropic" for e in table)
    elapsed = time.time() - start
    _report(request, 10, ok, elapsed, 1,
            f"{len(table)} oracle entries consistent, scaling exact, "
            f"coisotropic = 0")
