import math

import numpy as np
import pytest

from steadysweep.errors import ConfigError, DomainError, InversionError
from steadysweep.systems import (
    eval_eigen, eval_flux, get_model, invert_flux, list_models, PolyFlux, ScalarLaw1D,
    BoundarySpec,
)

MODELS_1D = ["burgers1d_hj", "isentropic_duct", "isentropic_duct_multi", "nozzle"]


def squared_flux():
    """Scalar ``f = v^2`` with zero source."""
    return ScalarLaw1D(name="sq", f=lambda v: v * v, df=lambda v: 2.0 * v, a=lambda v, x: 0.0 * v,
                       x_L=0.0, x_R=1.0,
                       boundary=BoundarySpec(left=lambda a: np.array([1.0]), n_alpha=0, right=()),
                       params={"right_value": -1.0})


def fd_jacobian(flux, U, eps=1e-6):
    n = U.size
    J = np.empty((n, n))
    for j in range(n):
        step = eps * max(abs(U[j]), 1e-12)
        e = np.zeros(n)
        e[j] = step
        J[:, j] = (flux(U + e) - flux(U - e)) / (2 * step)
    return J


def test_registry_contents():
    cat = list_models()
    for key in ["burgers1d_hj", "isentropic_duct", "isentropic_duct_multi", "nozzle", "three_states",
                "three_states_perturbed", "burgers2d", "scalar2d", "euler2d_reflection"]:
        assert key in cat
    with pytest.raises(ConfigError):
        get_model("nope")
    with pytest.raises(ConfigError):
        get_model("nozzle", bogus=1.0)


def test_isentropic_duct_definition(duct):
    x = np.linspace(0, 1, 7)
    assert np.allclose(duct.area(x), -0.4 * np.cos(np.pi * x) + 1.2)
    U0 = duct.boundary.left_state(())
    assert np.allclose(U0, [1.0, 2.0])
    rho_R = [c for c in duct.boundary.right][0]
    assert rho_R(np.array([2.0, 5.0])) == pytest.approx(0.0)


def test_nozzle_definition(nozzle):
    p = nozzle.params
    assert p["gamma"] == 1.4 and p["R"] == 8.3144
    assert p["p_left"] == 1.0 and p["p_right"] == 0.6784 and p["T_left"] == 300.0
    x = np.linspace(0, 3, 5)
    assert np.allclose(nozzle.area(x), 1 + 2.2 * (x - 1.5) ** 2)
    assert np.allclose(nozzle.darea(x), 4.4 * (x - 1.5))


def test_euler_definition():
    e = get_model("euler2d_reflection")
    assert e.top_state == (1.69997, 2.61934, -0.50632, 1.528191)
    assert e.inflow == pytest.approx((1.0, 2.9, 0.0, 1 / 1.4))


def test_eval_flux_examples(duct):
    assert np.allclose(eval_flux(duct, [1.0, 2.0]), [2.0, 5.0])
    assert np.allclose(eval_flux(squared_flux(), [1.0]), [1.0])
    nz = get_model("nozzle")
    x = 0.7
    U = nz.state_from_primitive(1.2, 0.0, 0.9, x)
    assert np.allclose(eval_flux(nz, U), [0.0, 0.9 * nz.area(x), 0.0])
    with pytest.raises(DomainError):
        eval_flux(duct, [np.nan, 1.0])
    with pytest.raises(DomainError):
        eval_flux(duct, [1.0])


def test_eval_eigen_examples(duct):
    lam, P, Pinv = eval_eigen(duct, [1.0, 2.0])
    # closed form m/rho -+ sqrt(kappa gamma rho^(gamma-1))
    assert np.allclose(lam, [2 - math.sqrt(1.4), 2 + math.sqrt(1.4)])
    assert np.allclose(lam, [0.8168, 3.1832], atol=1e-4)
    assert np.allclose(P @ Pinv, np.eye(2), atol=1e-10)
    assert np.allclose(eval_eigen(squared_flux(), [-1.0])[0], [-2.0])
    nz = get_model("nozzle")
    g = 1.4
    rho, c = 1.3, 1.0
    p = rho * c * c / g
    lam = eval_eigen(nz, nz.state_from_primitive(rho, 2.0, p, 0.4))[0]
    assert np.allclose(lam, [1.0, 2.0, 3.0])


def test_invert_flux_examples(duct):
    assert np.allclose(invert_flux(duct, [2.0, 5.0], [1.0, 2.0]), [1.0, 2.0])
    sq = squared_flux()
    assert invert_flux(sq, [1.0], [0.9])[0] == pytest.approx(1.0)
    assert invert_flux(sq, [1.0], [-0.9])[0] == pytest.approx(-1.0)
    with pytest.raises(InversionError):
        invert_flux(sq, [-1.0], [0.5])


@pytest.mark.parametrize("name", MODELS_1D)
def test_jacobian_matches_fd(name, rng):
    model = get_model(name)
    for U in model.sample_states(rng, 100):
        J = model.jacobian(U)
        assert np.max(np.abs(J - fd_jacobian(model.flux, U))) <= 1e-5 * max(1.0, np.max(np.abs(J)))


@pytest.mark.parametrize("name", MODELS_1D)
def test_eigen_diagonalises(name, rng):
    model = get_model(name)
    for U in model.sample_states(rng, 100):
        lam, P, Pinv = eval_eigen(model, U)
        J = model.jacobian(U)
        D = Pinv @ J @ P
        assert np.max(np.abs(D - np.diag(lam))) <= 1e-8 * max(1.0, np.max(np.abs(J)))
        assert np.all(np.diff(lam) > 0) or model.n == 1


@pytest.mark.parametrize("name", MODELS_1D)
def test_invert_flux_round_trip(name, rng):
    model = get_model(name)
    for U in model.sample_states(rng, 100):
        lam = model.eigenvalues(U)
        if np.min(np.abs(lam)) < 0.05 * np.max(np.abs(lam)):
            continue
        V = model.flux(U)
        W = invert_flux(model, V, U * (1 + 1e-3))
        assert np.max(np.abs(model.flux(W) - V)) <= 1e-12 * max(1.0, np.max(np.abs(V)))
        assert np.allclose(W, U, rtol=1e-8)


def test_euler_jacobians_match_fd(rng):
    e = get_model("euler2d_reflection")
    for _ in range(50):
        rho, u, v, p = rng.uniform(0.5, 2), rng.uniform(-2, 3), rng.uniform(-1, 1), rng.uniform(0.3, 2)
        U = e.conserved(rho, u, v, p)
        for fl, jac in ((e.flux_x, e.jacobian_x), (e.flux_y, e.jacobian_y)):
            J = jac(U)
            assert np.max(np.abs(J - fd_jacobian(fl, U))) <= 1e-5 * max(1.0, np.max(np.abs(J)))


def test_three_states_slope_relation():
    m = get_model("three_states")
    p = m.params
    assert p["alpha"] == pytest.approx((1 - p["u_left"] ** 2) / (p["k"] * p["u_left"]))
    assert p["k"] == pytest.approx(0.486111, abs=1e-6)
    assert p["split"] == 0.5


def test_polyflux_critical_points():
    f = PolyFlux((0.0, 1.0, 0.0, -1.0))
    assert np.allclose(f.critical_points, [-1 / math.sqrt(3), 1 / math.sqrt(3)])
    assert np.allclose(f.derivative(np.array(f.critical_points)), 0.0)
    assert PolyFlux((0.0, 0.0, 0.5)).critical_points == (0.0,)
    assert PolyFlux((0.0, 1.0)).critical_points == ()
