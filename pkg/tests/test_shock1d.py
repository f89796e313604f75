import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from steadysweep.errors import (
    EntropyViolationError, NoSolutionInBracketError, StructureInfeasibleError,
)
from steadysweep.reference import duct_shock_oracle, nozzle_oracle, oracle_scalar_root
from steadysweep.shock1d import (
    bc_tol, jump, matching_table, shoot_with_shock, solve_1d, solve_multi, solve_nested,
    solve_shock_location,
)
from steadysweep.sweep1d import Grid1D
from steadysweep.systems import get_model

from helpers import half_square


def test_jump_burgers(burgers):
    r = jump(burgers, [1.25])
    assert r.U_plus[0] == pytest.approx(-1.25)
    assert r.entropy_ok and r.entropy_margins() > 0
    with pytest.raises(EntropyViolationError):
        jump(burgers, [-1.0])


def test_jump_duct_against_bisection_oracle(duct):
    r = jump(duct, [1.0, 2.0])
    rho = oracle_scalar_root(lambda p: 4.0 / p + p ** 1.4 - 5.0, (1.0 + 1e-9, 10.0))
    assert r.U_plus[1] == pytest.approx(2.0, abs=1e-12)
    assert r.U_plus[0] == pytest.approx(rho, abs=1e-10)
    assert r.U_plus[0] == pytest.approx(2.34, abs=0.01)
    assert r.field_index == 0


@pytest.mark.parametrize("name", ["burgers1d_hj", "isentropic_duct", "nozzle"])
def test_jump_invariants_random_states(name):
    model = get_model(name)
    rng = np.random.default_rng(7)
    for U in model.sample_pre_shock_states(rng, 1000):
        r = jump(model, U)
        assert r.rh_residual <= 1e-10 * max(1.0, np.max(np.abs(model.flux(U))))
        lm, lp, k = r.lam_minus, r.lam_plus, r.field_index
        assert lm[k] > 0 > lp[k]
        if k > 0:
            assert lm[k - 1] < 0
        if k + 1 < model.n:
            assert lp[k + 1] > 0
        assert r.separation >= 1e-6 * (1 + np.max(np.abs(U)))


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 5.0))
def test_jump_is_involutive_for_burgers(v):
    model = get_model("burgers1d_hj")
    r = jump(model, [v])
    assert r.U_plus[0] == pytest.approx(-v)


def test_shoot_with_shock_burgers(burgers):
    g = Grid1D.for_model(burgers, 257)
    ok = shoot_with_shock(burgers, (), 0.5, g)
    assert abs(ok.bc_residual[0]) <= 2 * g.h
    off = shoot_with_shock(burgers, (), 0.25, g)
    # exact: v-(0.25) = 1.125, v+(x) = x/2 - 1.25 -> v(1) = -0.75
    assert off.bc_residual[0] == pytest.approx(0.25, abs=2 * g.h)


def test_burgers_shock_location_first_order(burgers):
    errs, hs = [], []
    for N in (64, 128, 256, 512):
        g = Grid1D.for_model(burgers, N)
        sol = solve_shock_location(burgers, (), g)
        assert abs(sol.x_S - 0.5) <= g.h
        e = np.max(np.abs(sol.states[:, 0] - burgers.exact(g.nodes))[np.abs(g.nodes - 0.5) > 2 * g.h])
        errs.append(e)
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios >= 1.6) & (ratios <= 2.6))


def test_duct_single_shock(duct):
    g = Grid1D.for_model(duct, 1024)
    sol = solve_shock_location(duct, (), g)
    x_exact = duct_shock_oracle(duct)
    assert len(x_exact) == 1
    assert abs(sol.x_S - x_exact[0]) <= 2 * g.h
    assert abs(sol.bc_residual[0]) <= bc_tol(g, duct.boundary.right[0])
    assert sol.jump.field_index == 0 and sol.jump.entropy_ok
    lam = sol.eigenvalues(duct)[:, 0]
    assert lam[sol.shock_node - 1] > 0 > lam[sol.shock_node]
    assert len(solve_multi(duct, g)) == 1


def test_duct_multi_four_solutions():
    model = get_model("isentropic_duct_multi")
    g = Grid1D.for_model(model, 1024)
    sols = solve_multi(model, g)
    assert len(sols) == 4
    zeros = [0.0] + list(model.source_zeros()) + [1.0]
    regions = {int(np.searchsorted(zeros, s.x_S)) for s in sols}
    assert len(regions) == 4
    for s in sols:
        assert s.jump.entropy_ok
        assert s.jump.rh_residual <= 1e-10 * np.max(np.abs(model.flux(s.jump.U_minus)))


def test_empty_bracket_raises(duct):
    g = Grid1D.for_model(duct, 256)
    x = duct_shock_oracle(duct)[0]
    with pytest.raises(NoSolutionInBracketError):
        solve_shock_location(duct, (), g, bracket=(0.0, x - 0.2))


def test_zero_source_incompatible_bc_is_empty():
    # constant branch 1; a shock gives -1 everywhere after it, never the target 0.5
    m = half_square(lambda u, x: 0.0 * u, 1.0, right_value=0.5)
    g = Grid1D(0.0, 1.0, 65)
    assert solve_multi(m, g, subdivision=[0.5]) == []


def test_spurious_solution_restarts(duct):
    g = Grid1D.for_model(duct, 512)
    ref = solve_shock_location(duct, (), g).shock_node
    rng = np.random.default_rng(11)
    x = g.x(ref)
    nodes = []
    for _ in range(20):
        lo = rng.uniform(0.0, x - 0.02)
        hi = rng.uniform(x + 0.02, 1.0)
        nodes.append(solve_shock_location(duct, (), g, bracket=(lo, hi)).shock_node)
    assert max(nodes) - min(nodes) <= 1


def test_matching_table_order():
    assert matching_table(0, 1, 1) == [("x_S", "bc", 0, "post")]
    rows = matching_table(1, 1, 1)
    assert [r[0] for r in rows] == ["alpha_1", "x_S"]
    assert rows[0][1] == "compat"
    with pytest.raises(StructureInfeasibleError):
        matching_table(0, 2, 1)


def test_solve_1d_reduces_to_shock_location(duct):
    g = Grid1D.for_model(duct, 256)
    a = solve_1d(duct, g)
    b = solve_shock_location(duct, (), g)
    assert len(a) == 1 and a[0].shock_node == b.shock_node


@pytest.fixture(scope="module")
def nozzle_solution():
    model = get_model("nozzle")
    g = Grid1D.for_model(model, 513)
    return model, g, solve_nested(model, g, k=1)


def test_nozzle_nested(nozzle_solution):
    model, g, sol = nozzle_solution
    tps = sol.turning_points
    assert len(tps) == 1 and abs(tps[0].x_T - 1.5) <= g.h
    assert abs(sol.bc_residual[0]) <= bc_tol(g, model.boundary.right[0])
    lam = sol.eigenvalues(model)[:, 0]
    s = sol.shock_node
    assert lam[0] < 0
    j_T = int(np.ceil((tps[0].x_T - g.x_L) / g.h))
    assert np.all(lam[j_T + 1:s] > 0) and np.all(lam[s:] < 0)
    oracle = nozzle_oracle(model)
    assert sol.params.alphas[0] == pytest.approx(oracle["u_left"], rel=0.02)


def test_nozzle_no_shock_needed_is_infeasible():
    base = get_model("nozzle")
    p_smooth = nozzle_oracle(base)["p_exit_supersonic"]
    model = get_model("nozzle", p_right=p_smooth)
    with pytest.raises(StructureInfeasibleError):
        solve_nested(model, Grid1D.for_model(model, 257), k=1)
