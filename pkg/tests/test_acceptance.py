"""Acceptance suite: one test per criterion, each reporting a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py`` or standalone with
``python3 tests/test_acceptance.py``; the verdicts are printed in the
terminal summary.
"""

import logging
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from helpers import criterion  # noqa: E402
from steadysweep.estimators import grid_2d  # noqa: E402
from steadysweep.match2d import solve_2d  # noqa: E402
from steadysweep.reference import duct_shock_oracle  # noqa: E402
from steadysweep.shock1d import (  # noqa: E402
    bc_tol, jump, solve_multi, solve_nested, solve_shock_location,
)
from steadysweep.studies import compare_with_reference, study_scaling  # noqa: E402
from steadysweep.sweep1d import Grid1D  # noqa: E402
from steadysweep.sweep2d import (  # noqa: E402
    Grid2D, conservation_residual, godunov_flux, shock_loci, sweep,
)
from steadysweep.systems import PolyFlux, get_model  # noqa: E402

MODELS_1D = ["burgers1d_hj", "isentropic_duct", "isentropic_duct_multi", "nozzle"]
MODELS_2D_SCALAR = ["three_states", "three_states_perturbed", "burgers2d", "scalar2d"]


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


def curve_distance(curves, X, Y):
    P = np.column_stack([X.ravel(), Y.ravel()])
    return np.min([c.distance_to(P) for c in curves], axis=0).reshape(X.shape)


def lax_strict(r):
    lm, lp, k = r.lam_minus, r.lam_plus, r.field_index
    ok = lm[k] > 0 > lp[k]
    if k > 0:
        ok &= lm[k - 1] < 0
    if k + 1 < len(lp):
        ok &= lp[k + 1] > 0
    return bool(ok)


def fd_jacobian(flux, U, eps=1e-6):
    n = U.size
    J = np.empty((n, n))
    for j in range(n):
        step = eps * max(abs(U[j]), 1e-12)
        e = np.zeros(n)
        e[j] = step
        J[:, j] = (flux(U + e) - flux(U - e)) / (2 * step)
    return J


def test_01_burgers1d():
    with criterion(1, "burgers1d_hj shock at 0.5 +- h, first-order branch, < 1 s") as m:
        model = get_model("burgers1d_hj")
        solve_shock_location(model, (), Grid1D.for_model(model, 32))
        errs, offsets, times = [], [], []
        for N in (64, 128, 256, 512):
            g = Grid1D.for_model(model, N)
            sol, dt = timed(solve_shock_location, model, (), g)
            times.append(dt)
            offsets.append(abs(sol.x_S - 0.5) / g.h)
            left = g.nodes < sol.x_S - 2 * g.h
            errs.append(float(np.max(np.abs(sol.states[left, 0] - (g.nodes[left] / 2 + 1)))))
        ratios = [errs[i] / errs[i + 1] for i in range(3)]
        m.update(shock_offset_h=offsets, ratios=ratios, max_time=max(times))
        assert max(offsets) <= 1.0
        assert all(1.6 <= r <= 2.6 for r in ratios)
        assert max(times) < 1.0


def test_02_isentropic_duct():
    with criterion(2, "isentropic_duct single admissible shock, LF <= 5h, < 10 s at N=2048") as m:
        model = get_model("isentropic_duct")
        solve_multi(model, Grid1D.for_model(model, 64))
        g = Grid1D.for_model(model, 2048)
        sols, dt = timed(solve_multi, model, g)
        assert len(sols) == 1
        sol = sols[0]
        r = sol.jump
        scale = max(1.0, float(np.max(np.abs(model.flux(r.U_minus)))))
        cmp, _ = compare_with_reference(model, Grid1D.for_model(model, 128))
        m.update(x_S=sol.x_S, oracle=float(duct_shock_oracle(model)[0]),
                 bc_residual=float(sol.bc_residual[0]), rh=r.rh_residual,
                 margin=r.entropy_margins(), lf_l1_over_h=cmp["in_units_of_h"], time=dt)
        assert abs(sol.bc_residual[0]) <= bc_tol(g, model.boundary.right[0])
        assert r.rh_residual <= 1e-10 * scale
        assert lax_strict(r) and r.entropy_margins() > 0
        assert cmp["in_units_of_h"] <= 5.0
        assert dt < 10.0


def test_03_isentropic_duct_multi():
    with criterion(3, "isentropic_duct_multi four admissible solutions, one per source region") as m:
        model = get_model("isentropic_duct_multi")
        g = Grid1D.for_model(model, 1024)
        sols = solve_multi(model, g)
        zeros = [model.x_L] + list(model.source_zeros()) + [model.x_R]
        regions = sorted(int(np.searchsorted(zeros, s.x_S)) for s in sols)
        m.update(count=len(sols), x_S=[s.x_S for s in sols], regions=regions)
        assert len(sols) == 4 and len(set(regions)) == 4
        for s in sols:
            scale = max(1.0, float(np.max(np.abs(model.flux(s.jump.U_minus)))))
            assert s.jump.rh_residual <= 1e-10 * scale
            assert lax_strict(s.jump) and s.jump.entropy_margins() > 0
            assert abs(s.bc_residual[0]) <= bc_tol(g, model.boundary.right[0])


def test_04_nozzle():
    with criterion(4, "nozzle nested solve, x_T = 1.5 +- h, exit p, eigen pattern, LF, < 30 s") as m:
        model = get_model("nozzle")
        g = Grid1D.for_model(model, 1024)
        sol, dt = timed(solve_nested, model, g, k=1)
        tps = sol.turning_points
        p_exit = float(model.pressure(sol.states[-1], model.x_R))
        lam = sol.eigenvalues(model)[:, 0]
        s = sol.shock_node
        j_T = int(np.ceil((tps[0].x_T - g.x_L) / g.h))
        cmp, _ = compare_with_reference(model, Grid1D.for_model(model, 128))
        m.update(x_T=tps[0].x_T, x_S=sol.x_S, p_exit=p_exit, lf_l1_over_h=cmp["in_units_of_h"],
                 time=dt)
        assert len(tps) == 1 and abs(tps[0].x_T - 1.5) <= g.h
        assert abs(p_exit - 0.6784) <= bc_tol(g, model.boundary.right[0])
        assert lam[0] < 0
        assert np.all(lam[j_T + 1:s] > 0) and np.all(lam[s:] < 0)
        assert lax_strict(sol.jump)
        assert cmp["in_units_of_h"] <= 5.0
        assert dt < 30.0


def test_05_three_states():
    with criterion(5, "three_states exact off the curves, slopes +-1.2, perturbed RH, < 30 s") as m:
        model = get_model("three_states")
        solve_2d(model, Grid2D.for_model(model, 33))
        g = Grid2D.for_model(model, 513)
        sol, dt = timed(solve_2d, model, g)
        X, Y = g.mesh()
        far = curve_distance(sol.curves, X, Y) > g.hx
        linf = float(np.max(np.abs(sol.u - model.exact(X, Y))[far]))
        tol = 2 * g.hx * math.hypot(1, 1.2)
        dev = []
        for c, sgn, x0 in zip(sol.curves, (1, -1), (0.0, 1.0)):
            V = c.vertices
            # the two curves meet at (0.5, 0.6); above it the second one separates
            # the left and right states along x = 0.5
            low = V[:, 1] < 0.6 - tol
            dev.append(float(np.max(np.abs(V[low, 1] - sgn * 1.2 * (V[low, 0] - x0)))))
        pert = get_model("three_states_perturbed")
        psol, pdt = timed(solve_2d, pert, g)
        u = psol.u
        scale = max(1.0, float(np.max(np.abs(pert.f(u)))), float(np.max(np.abs(pert.g(u)))))
        bend, rh = [], []
        for c in psol.curves:
            V = c.vertices
            fit = np.polyfit(V[:, 0], V[:, 1], 1)
            bend.append(float(np.max(np.abs(np.polyval(fit, V[:, 0]) - V[:, 1]))) / g.hx)
            rh.append(float(np.max(np.abs(c.rh_residual))))
        m.update(linf=linf, slope_dev_cells=[d / g.hx for d in dev], bend_cells=bend,
                 max_rh=max(rh), time=dt, perturbed_time=pdt)
        assert len(sol.curves) == 2 and sol.valid.all()
        assert linf == 0.0
        assert all(d <= tol for d in dev)
        assert len(psol.curves) == 2 and min(bend) > 2
        assert max(rh) <= 10 * g.hx * scale
        assert dt < 30.0 and pdt < 30.0


def test_06_burgers2d(caplog):
    with criterion(6, "burgers2d curve within one cell, first-order L1, degenerate path logged") as m:
        model = get_model("burgers2d")
        xs = np.linspace(0, 1, 4001)
        ys = 0.5 + 0.5 * np.cos(np.pi * xs)
        haus, errs, degenerate = [], [], []
        for n in (64, 128, 256):
            g = Grid2D.for_model(model, n + 1)
            with caplog.at_level(logging.INFO, logger="steadysweep.match2d"):
                sol = solve_2d(model, g)
            c = sol.curves[0]
            V = c.vertices
            d1 = c.distance_to(np.column_stack([xs, ys])).max()
            d2 = np.min(np.hypot(V[:, None, 0] - xs[None], V[:, None, 1] - ys[None]), axis=1).max()
            haus.append(float(max(d1, d2)) / g.hx)
            X, Y = g.mesh()
            errs.append(float(np.mean(np.abs(sol.u - model.exact(X, Y)))))
            degenerate.append(bool(c.degenerate.any()))
        ratios = [errs[0] / errs[1], errs[1] / errs[2]]
        logged = any("degenerate" in r.message for r in caplog.records)
        m.update(hausdorff_cells=haus, l1=errs, ratios=ratios, logged=logged)
        assert max(haus) <= 1.0
        assert all(1.6 <= r <= 2.6 for r in ratios)
        assert all(degenerate) and logged


def test_07_scalar2d():
    with criterion(7, "scalar2d one bottom sweep, first-order residual, LF <= 5h") as m:
        model = get_model("scalar2d")
        res = []
        for n in (33, 65, 129, 257):
            g = Grid2D.for_model(model, n)
            sol = solve_2d(model, g)
            F = sweep(model, "bottom", g)
            assert sol.curves == [] and sol.valid.all() and F.coverage() == 1.0
            assert np.array_equal(sol.values, F.values)
            R = conservation_residual(model, F)
            X, Y = g.mesh()
            # distance to the fan edges and the shock; the residual is only
            # meaningful away from these kinks and jumps
            d = np.minimum(np.abs(X - 1.5 * Y) / math.hypot(1, 1.5),
                           np.abs(X - 1 + 0.5 * Y) / math.hypot(1, 0.5))
            d = np.minimum(d, np.where(Y > 0.42, np.abs(X - 0.75 - 0.5 * (Y - 0.5)) / math.hypot(1, 0.5),
                                       np.inf))
            smooth = (d > 0.08) & (np.hypot(X, Y) > 0.15) & (np.hypot(X - 1, Y) > 0.15) & np.isfinite(R)
            res.append(float(np.mean(np.abs(R[smooth]))))
        ratios = [res[i] / res[i + 1] for i in range(3)]
        cmp, _ = compare_with_reference(model, Grid2D.for_model(model, 65))
        m.update(residual=res, ratios=ratios, lf_l1_over_h=cmp["in_units_of_h"])
        assert all(1.6 <= r <= 2.6 for r in ratios)
        assert cmp["in_units_of_h"] <= 5.0


def test_08_euler2d_reflection():
    with criterion(8, "euler2d_reflection supersonic left sweep, shock loci, LF <= 10h, < 120 s") as m:
        model = get_model("euler2d_reflection")
        g = grid_2d(model, 1025)
        F, dt = timed(sweep, model, "left", g)
        lam = model.eigenvalues_x(F.values)
        rho, u, v, p = model.primitive(F.values)
        supersonic = float(np.min(u - np.sqrt(model.gamma * p / rho)))
        loci = shock_loci(F, threshold=0.3)
        cmp, _ = compare_with_reference(model, grid_2d(model, 129))
        m.update(grid=(g.mx, g.my), min_u_minus_c=supersonic, loci=len(loci),
                 lf_l1_over_h=cmp["in_units_of_h"], time=dt)
        assert F.coverage() == 1.0
        assert np.all(lam > 0) and supersonic > 0
        # incident shock enters near the top left, the reflected one leaves to the top right
        assert len(loci) > g.my // 2
        assert loci[:, 0].min() < 1.0 and loci[:, 0].max() > 3.0
        assert cmp["in_units_of_h"] <= 10.0
        assert dt < 120.0


def test_09_scaling():
    with criterion(9, "time-vs-N log-log slopes for burgers2d, scalar2d and the duct") as m:
        slopes = {}
        for name, sizes, lo, hi in (("burgers2d", [65, 129, 257, 513], 0.8, 1.3),
                                    ("scalar2d", [65, 129, 257, 513], 0.8, 1.3),
                                    ("isentropic_duct", [256, 512, 1024, 2048], 0.9, 1.4)):
            out = study_scaling(get_model(name), sizes, repeats=3, warmup=True)
            slopes[name] = (out["slope"], lo, hi)
        m.update(**{k: v[0] for k, v in slopes.items()})
        for s, lo, hi in slopes.values():
            assert lo <= s <= hi


def test_10_property_suites():
    with criterion(10, "jump invariants, Godunov flux, Jacobian FD, spurious-solution restarts") as m:
        rng = np.random.default_rng(20240601)
        n_jump = 0
        for name in ("burgers1d_hj", "isentropic_duct", "isentropic_duct_multi", "nozzle"):
            model = get_model(name)
            for U in model.sample_pre_shock_states(rng, 1000):
                r = jump(model, U)
                assert r.rh_residual <= 1e-10 * max(1.0, float(np.max(np.abs(model.flux(U)))))
                assert lax_strict(r)
                n_jump += 1
        n_god = 0
        for name in MODELS_2D_SCALAR:
            model = get_model(name)
            for fl in (model.flux_x, model.flux_y):
                a = rng.uniform(-2.5, 2.5, 10_000)
                b = rng.uniform(-2.5, 2.5, 10_000)
                d = rng.uniform(0, 0.1, 10_000)
                G = godunov_flux(fl, a, b)
                assert np.array_equal(godunov_flux(fl, a, a), fl(a))
                assert np.all(godunov_flux(fl, a + d, b) >= G - 1e-12)
                assert np.all(godunov_flux(fl, a, b + d) <= G + 1e-12)
                n_god += a.size
        n_jac = 0
        for name in MODELS_1D:
            model = get_model(name)
            for U in model.sample_states(rng, 100):
                J = model.jacobian(U)
                assert np.max(np.abs(J - fd_jacobian(model.flux, U))) <= 1e-5 * max(1.0, np.max(np.abs(J)))
                n_jac += 1
        for name in MODELS_2D_SCALAR:
            model = get_model(name)
            u = rng.uniform(-2, 2, 100)
            for fl, dfl in ((model.f, model.df), (model.g, model.dg)):
                fd = (fl(u + 1e-6) - fl(u - 1e-6)) / 2e-6
                assert np.allclose(dfl(u), fd, rtol=1e-6, atol=1e-6)
            n_jac += u.size
        e = get_model("euler2d_reflection")
        for _ in range(100):
            U = e.conserved(rng.uniform(0.5, 2), rng.uniform(-2, 3), rng.uniform(-1, 1), rng.uniform(0.3, 2))
            for fl, jac in ((e.flux_x, e.jacobian_x), (e.flux_y, e.jacobian_y)):
                J = jac(U)
                assert np.max(np.abs(J - fd_jacobian(fl, U))) <= 1e-5 * max(1.0, np.max(np.abs(J)))
            n_jac += 1
        duct = get_model("isentropic_duct")
        g = Grid1D.for_model(duct, 512)
        x = g.x(solve_shock_location(duct, (), g).shock_node)
        nodes = []
        for _ in range(20):
            br = (rng.uniform(0.0, x - 0.02), rng.uniform(x + 0.02, 1.0))
            nodes.append(solve_shock_location(duct, (), g, bracket=br).shock_node)
        m.update(jump_states=n_jump, godunov_pairs=n_god, jacobian_states=n_jac,
                 restart_spread=max(nodes) - min(nodes))
        assert max(nodes) - min(nodes) <= 1


def test_godunov_flux_of_polyflux_is_callable():
    # guards the property suite above: every scalar 2D flux is a PolyFlux
    for name in MODELS_2D_SCALAR:
        model = get_model(name)
        assert isinstance(model.flux_x, PolyFlux) and isinstance(model.flux_y, PolyFlux)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
