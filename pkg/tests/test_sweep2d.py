import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from steadysweep.errors import ConfigError
from steadysweep.estimators import grid_2d
from steadysweep.reference import evolve_lf_2d
from steadysweep.sweep2d import (
    Grid2D, conservation_residual, godunov_flux, shock_loci, sweep, sweep_scalar, sweep_system,
)
from steadysweep.systems import PolyFlux, ScalarLaw2D, get_model

HALF_SQ = PolyFlux((0.0, 0.0, 0.5))
CUBIC = PolyFlux((0.0, 1.0, 0.0, -1.0))


def brute_godunov(f, a, b, n=2001):
    s = np.linspace(min(a, b), max(a, b), n)
    return f(s).min() if a <= b else f(s).max()


def test_godunov_examples():
    assert godunov_flux(HALF_SQ, 1.0, -1.0) == 0.5
    assert godunov_flux(HALF_SQ, -1.0, 1.0) == 0.0
    u = np.linspace(-2, 2, 41)
    assert np.array_equal(godunov_flux(CUBIC, u, u), CUBIC(u))


def test_godunov_consistency_and_monotonicity_sampled():
    rng = np.random.default_rng(3)
    for f in (HALF_SQ, CUBIC):
        a = rng.uniform(-2, 2, 10_000)
        b = rng.uniform(-2, 2, 10_000)
        d = rng.uniform(0, 0.1, 10_000)
        F = godunov_flux(f, a, b)
        assert np.array_equal(godunov_flux(f, a, a), f(a))
        assert np.all(godunov_flux(f, a + d, b) >= F - 1e-14)
        assert np.all(godunov_flux(f, a, b + d) <= F + 1e-14)


@settings(max_examples=300, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_godunov_matches_brute_force(a, b):
    for f in (HALF_SQ, CUBIC):
        assert godunov_flux(f, a, b) == pytest.approx(brute_godunov(f, a, b), abs=1e-5)


def constant_model(c=0.7):
    return ScalarLaw2D(name="const", flux_x=HALF_SQ, flux_y=HALF_SQ,
                       xlim=(0.0, 1.0), ylim=(0.0, 1.0),
                       boundary={s: (lambda t, c=c: c + 0.0 * t) for s in ("left", "right", "bottom", "top")},
                       plan={"sweeps": ["bottom"], "merges": []})


@pytest.mark.parametrize("side", ["bottom", "top", "left", "right"])
def test_constant_data_is_fixed_point(side):
    # the sign makes the marching speed positive for each side
    c = 0.7 if side in ("bottom", "left") else -0.7
    m = constant_model(c)
    F = sweep_scalar(m, side, Grid2D.for_model(m, 17, 13))
    assert F.values.shape == (13, 17, 1)
    assert np.all(F.valid) and np.all(F.u == c)
    assert F.origin == side


def test_unknown_side_and_missing_data():
    m = get_model("scalar2d")
    g = Grid2D.for_model(m, 9)
    with pytest.raises(ConfigError):
        sweep_scalar(m, "diagonal", g)
    with pytest.raises(ConfigError):
        sweep_scalar(m, "top", g)


def test_scalar2d_bottom_sweep_first_order():
    m = get_model("scalar2d")
    errs = []
    for n in (33, 65, 129):
        g = Grid2D.for_model(m, n)
        F = sweep(m, "bottom", g)
        assert F.coverage() == 1.0
        X, Y = g.mesh()
        errs.append(np.mean(np.abs(F.u - m.exact(X, Y))))
    assert 1.6 <= errs[0] / errs[1] <= 2.6 and 1.6 <= errs[1] / errs[2] <= 2.6
    # the interior shock shows up as a jump from 1.5 to -0.5
    loci = shock_loci(F, threshold=1.0)
    upper = loci[loci[:, 1] > 0.6]
    assert np.all(np.abs(upper[:, 0] - (0.75 + 0.5 * (upper[:, 1] - 0.5))) <= 3 * g.hx)


def test_three_states_branches():
    m = get_model("three_states")
    g = Grid2D.for_model(m, 33)
    B = sweep(m, "bottom", g)
    assert np.all(B.u == 0.0) and B.coverage() == 1.0
    L = sweep(m, "left", g)
    assert np.all(L.u[L.valid] == 0.75)
    R = sweep(m, "right", g)
    assert np.all(R.u[R.valid] == -0.75)


def test_degenerate_paraxial_speed_is_masked():
    # g(u) = u - u^3 has g'(u) = 0 at u = 1/sqrt(3): bottom data there cannot be marched
    m = ScalarLaw2D(name="deg", flux_x=HALF_SQ, flux_y=CUBIC, xlim=(0, 1), ylim=(0, 1),
                    boundary={"bottom": lambda x: np.where(x < 0.5, 0.0, 1 / np.sqrt(3))},
                    plan={"sweeps": ["bottom"], "merges": []})
    F = sweep_scalar(m, "bottom", Grid2D.for_model(m, 17))
    assert not F.valid[0, -1] and F.valid[0, 0]
    assert set(np.unique(F.reason[~F.valid])) <= {1, 3}
    assert "paraxial degeneracy" in F.summary()["mask"]


def test_grid_decomposition_bit_for_bit():
    m = get_model("scalar2d")
    full = sweep_scalar(m, "bottom", Grid2D((0.0, 1.0), (0.0, 1.0), 65, 65))
    lower = sweep_scalar(m, "bottom", Grid2D((0.0, 1.0), (0.0, 0.5), 65, 33))
    upper = sweep_scalar(m, "bottom", Grid2D((0.0, 1.0), (0.5, 1.0), 65, 33), init=lower.u[-1])
    assert np.array_equal(full.u[:33], lower.u)
    assert np.array_equal(full.u[32:], upper.u)


def test_sweep_deterministic():
    m = get_model("burgers2d")
    g = Grid2D.for_model(m, 33)
    assert np.array_equal(sweep(m, "top", g).values, sweep(m, "top", g).values)


def test_equivalence_residual_first_order():
    # smooth region of the burgers2d top branch: above the shock curve
    m = get_model("burgers2d")
    res = []
    for n in (33, 65, 129):
        g = Grid2D.for_model(m, n)
        F = sweep(m, "top", g)
        R = conservation_residual(m, F)
        X, Y = g.mesh()
        smooth = (Y > 0.5 + 0.5 * np.cos(np.pi * X) + 0.15) & np.isfinite(R)
        res.append(np.mean(np.abs(R[smooth])))
    assert res[0] / res[1] > 1.5 and res[1] / res[2] > 1.5


@pytest.fixture(scope="module")
def euler_field():
    m = get_model("euler2d_reflection")
    g = grid_2d(m, 129)
    return m, g, sweep_system(m, "left", g)


def test_euler_left_sweep_supersonic(euler_field):
    m, g, F = euler_field
    assert F.coverage() == 1.0
    lam = m.eigenvalues_x(F.values)
    assert np.all(lam > 0)
    rho, u, v, p = m.primitive(F.values)
    assert np.min(u - np.sqrt(1.4 * p / rho)) > 0


def test_euler_total_enthalpy(euler_field):
    m, g, F = euler_field
    rho, u, v, p = m.primitive(F.values)
    H = (F.values[..., 3] + p) / rho
    U0 = m.conserved(*m.inflow)
    H_in = (U0[3] + m.inflow[3]) / U0[0]
    assert np.median(np.abs(H - H_in)) <= 5 * g.hx * H_in


def test_euler_shocks_detected(euler_field):
    m, g, F = euler_field
    loci = shock_loci(F, threshold=0.3)
    assert len(loci) > g.my // 2
    # incident shock enters from the top left, reflected shock leaves to the top right
    assert loci[:, 0].min() < 1.0 and loci[:, 0].max() > 3.0


def test_euler_uniform_inflow_fixed_point():
    m = get_model("euler2d_reflection", top_state=(1.0, 2.9, 0.0, 1 / 1.4))
    F = sweep_system(m, "left", grid_2d(m, 33))
    assert np.allclose(F.values, m.conserved(*m.inflow), rtol=1e-12, atol=1e-12)


def test_lf2d_constant_converges_immediately():
    m = constant_model()
    run = evolve_lf_2d(m, Grid2D.for_model(m, 9), init=np.full((9, 9, 1), 0.7))
    assert run.converged and run.steps <= 1
    assert np.all(run.states == 0.7)
