"""Conservation-law models and the registry of built-in benchmark problems.

A one-dimensional model describes the steady system ``f(U)_x = a(U, x)`` on
``[x_L, x_R]`` together with its boundary data.  Two-dimensional models
describe ``f(U)_x + g(U)_y = a(U, x, y)`` on a rectangle.

States are plain ``numpy`` arrays.  1D models work on a single state of
shape ``(n,)``; the 2D Euler model is vectorised over leading axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numba import njit

from .errors import (
    ConfigError,
    DomainError,
    HyperbolicityError,
    InversionError,
    NearSonicError,
)

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50


# ---------------------------------------------------------------------------
# Boundary specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RightCondition:
    """One scalar right-boundary condition ``B_R^k(U) = 0``.

    ``target`` is the physical value being imposed; it only sets the scale
    used for tolerances.
    """

    name: str
    func: Callable[[np.ndarray], float]
    target: float = 1.0

    def __call__(self, U):
        return float(self.func(U))

    @property
    def scale(self):
        return max(1.0, abs(self.target))


@dataclass(frozen=True)
class BoundarySpec:
    """Left family ``U_L(alpha_1..alpha_I)`` and right conditions ``B_R^1..B_R^J``."""

    left: Callable[[Sequence[float]], np.ndarray]
    n_alpha: int
    right: tuple
    alpha_names: tuple = ()
    alpha_seed: tuple = ()

    @property
    def n_right(self):
        return len(self.right)

    def left_state(self, alphas=()):
        alphas = tuple(alphas)
        if len(alphas) != self.n_alpha:
            raise ConfigError(
                f"left boundary expects {self.n_alpha} parameters, got {len(alphas)}")
        return np.asarray(self.left(alphas), dtype=float)

    def right_residual(self, U):
        return np.array([cond(U) for cond in self.right])


# ---------------------------------------------------------------------------
# 1D models
# ---------------------------------------------------------------------------

class ConservationLaw1D:
    """Base class for steady 1D systems ``f(U)_x = a(U, x)``.

    Subclasses provide ``flux``, ``jacobian``, ``source`` and ``eigen``.
    Eigenvalues are returned in ascending order with matching right
    eigenvectors as the columns of ``P``.
    """

    # subclasses fill these in
    name: str
    n: int
    x_L: float
    x_R: float
    boundary: BoundarySpec

    def flux(self, U):
        raise NotImplementedError

    def jacobian(self, U):
        raise NotImplementedError

    def source(self, U, x):
        raise NotImplementedError

    def eigen(self, U):
        raise NotImplementedError

    def eigenvalues(self, U):
        return self.eigen(U)[0]

    def check_state(self, U):
        """Raise if ``U`` is outside the hyperbolic region."""

    # batch forms over arrays of shape (N, n), used by time evolution
    def flux_batch(self, U):
        return np.array([self.flux(u) for u in U])

    def source_batch(self, U, x):
        return np.array([self.source(u, xi) for u, xi in zip(U, x)])

    def speed_batch(self, U):
        """Spectral radius of the flux Jacobian at each state."""
        return np.array([np.max(np.abs(self.eigenvalues(u))) for u in U])

    def shock_guesses(self, U):
        """Initial guesses for the non-trivial root of ``f(U+) = f(U-)``."""
        return [-np.asarray(U, dtype=float)]

    def source_zeros(self):
        """Locations where the source coefficient changes sign, if known a priori."""
        return None

    def sample_states(self, rng, size):
        raise NotImplementedError

    def sample_pre_shock_states(self, rng, size):
        """States from which an admissible stationary shock exists."""
        return self.sample_states(rng, size)

    # Lax-Friedrichs boundary closure ---------------------------------------
    def reference_end_states(self):
        """States used to initialise time evolution by linear interpolation."""
        raise NotImplementedError

    def lf_left(self, U_next):
        raise NotImplementedError

    def lf_right(self, U_prev):
        raise NotImplementedError

    @property
    def domain(self):
        return (self.x_L, self.x_R)

    def describe(self):
        return {"name": self.name, "dimension": 1, "n": self.n,
                "domain": [self.x_L, self.x_R], "params": dict(self.params),
                "n_alpha": self.boundary.n_alpha,
                "right_conditions": [c.name for c in self.boundary.right]}


@dataclass(frozen=True)
class ScalarLaw1D(ConservationLaw1D):
    """Scalar law ``f(u)_x = a(u, x)`` with user supplied closed forms."""

    name: str
    f: Callable
    df: Callable
    a: Callable
    x_L: float
    x_R: float
    boundary: BoundarySpec
    sonic_value: float = 0.0
    exact: Optional[Callable] = None
    exact_shock: Optional[float] = None
    params: dict = field(default_factory=dict)
    n: int = 1

    def flux(self, U):
        return np.array([self.f(U[0])])

    def jacobian(self, U):
        return np.array([[self.df(U[0])]])

    def source(self, U, x):
        return np.array([self.a(U[0], x)])

    def eigenvalues(self, U):
        return np.array([self.df(U[0])])

    def eigen(self, U):
        one = np.ones((1, 1))
        return self.eigenvalues(U), one, one

    def flux_batch(self, U):
        return np.asarray(self.f(U[:, 0]), dtype=float).reshape(-1, 1)

    def source_batch(self, U, x):
        return (np.asarray(self.a(U[:, 0], x), dtype=float) * np.ones(len(U))).reshape(-1, 1)

    def speed_batch(self, U):
        return np.abs(self.df(U[:, 0]))

    def shock_guesses(self, U):
        return [np.array([2.0 * self.sonic_value - U[0]])]

    def sample_states(self, rng, size):
        return rng.uniform(-3.0, 3.0, size=(size, 1))

    def sample_pre_shock_states(self, rng, size):
        lo = self.sonic_value + 0.05
        return rng.uniform(lo, lo + 3.0, size=(size, 1))

    def reference_end_states(self):
        return self.boundary.left_state(self.boundary.alpha_seed), self.params["right_value"] * np.ones(1)

    def lf_left(self, U_next):
        return self.boundary.left_state(self.boundary.alpha_seed)

    def lf_right(self, U_prev):
        return np.array([self.params["right_value"]])


def burgers1d_hj(v_left=1.0, v_right=-1.0):
    """``(v^2)_x = v`` on [0, 1], the derivative of ``u_x^2 = u``."""
    boundary = BoundarySpec(
        left=lambda alphas: np.array([v_left]),
        n_alpha=0,
        right=(RightCondition("v(1)", lambda U: U[0] - v_right, v_right),),
    )
    exact_left = lambda x: 0.5 * np.asarray(x) + v_left
    exact_right = lambda x: 0.5 * np.asarray(x) + v_right - 0.5

    def exact(x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= 0.5, exact_left(x), exact_right(x))

    return ScalarLaw1D(
        name="burgers1d_hj",
        f=lambda v: v * v,
        df=lambda v: 2.0 * v,
        a=lambda v, x: v,
        x_L=0.0, x_R=1.0,
        boundary=boundary,
        exact=exact,
        exact_shock=0.5,
        params={"v_left": v_left, "v_right": v_right, "right_value": v_right},
    )


@dataclass(frozen=True)
class IsentropicDuct(ConservationLaw1D):
    """Isentropic flow in a duct of area ``A(x) = c0 - c1 cos(omega pi x)``.

    ``U = (rho, m)``, ``f = (m, m^2/rho + kappa rho^gamma)`` and
    ``a = -(A'/A) (m, m^2/rho)``.
    """

    component_names = ("rho", "m")

    name: str = "isentropic_duct"
    gamma: float = 1.4
    kappa: float = 1.0
    area_c0: float = 1.2
    area_c1: float = 0.4
    area_omega: float = 1.0
    rho_left: float = 1.0
    m_left: float = 2.0
    rho_right: float = 2.0
    x_L: float = 0.0
    x_R: float = 1.0
    n: int = 2

    @property
    def params(self):
        return {"gamma": self.gamma, "kappa": self.kappa, "area_c0": self.area_c0,
                "area_c1": self.area_c1, "area_omega": self.area_omega,
                "rho_left": self.rho_left, "m_left": self.m_left,
                "rho_right": self.rho_right}

    @property
    def boundary(self):
        left = np.array([self.rho_left, self.m_left])
        return BoundarySpec(
            left=lambda alphas: left.copy(),
            n_alpha=0,
            right=(RightCondition("rho(x_R)", lambda U: U[0] - self.rho_right, self.rho_right),),
        )

    def area(self, x):
        return self.area_c0 - self.area_c1 * np.cos(self.area_omega * np.pi * x)

    def darea(self, x):
        w = self.area_omega * np.pi
        return self.area_c1 * w * np.sin(w * x)

    def check_state(self, U):
        if not U[0] > 0.0:
            raise HyperbolicityError("non-positive density", state=U)

    def flux(self, U):
        rho, m = U
        return np.array([m, m * m / rho + self.kappa * rho ** self.gamma])

    def jacobian(self, U):
        rho, m = U
        u = m / rho
        return np.array([[0.0, 1.0],
                         [-u * u + self.kappa * self.gamma * rho ** (self.gamma - 1.0), 2.0 * u]])

    def source(self, U, x):
        rho, m = U
        r = -self.darea(x) / self.area(x)
        return np.array([r * m, r * m * m / rho])

    def sound_speed(self, rho):
        return math.sqrt(self.kappa * self.gamma * rho ** (self.gamma - 1.0))

    def flux_batch(self, U):
        rho, m = U[:, 0], U[:, 1]
        return np.column_stack([m, m * m / rho + self.kappa * rho ** self.gamma])

    def source_batch(self, U, x):
        rho, m = U[:, 0], U[:, 1]
        r = -self.darea(x) / self.area(x)
        return np.column_stack([r * m, r * m * m / rho])

    def speed_batch(self, U):
        rho, m = U[:, 0], U[:, 1]
        return np.abs(m / rho) + np.sqrt(self.kappa * self.gamma * rho ** (self.gamma - 1.0))

    def eigenvalues(self, U):
        rho, m = U
        if not rho > 0.0:
            raise HyperbolicityError("non-positive density", state=U)
        u = m / rho
        c = self.sound_speed(rho)
        return np.array([u - c, u + c])

    def eigen(self, U):
        lam = self.eigenvalues(U)
        l1, l2 = lam
        P = np.array([[1.0, 1.0], [l1, l2]])
        Pinv = np.array([[l2, -1.0], [-l1, 1.0]]) / (l2 - l1)
        return lam, P, Pinv

    def sonic_density(self, m):
        return (m * m / (self.kappa * self.gamma)) ** (1.0 / (self.gamma + 1.0))

    def shock_guesses(self, U):
        rho, m = U
        rs = self.sonic_density(m)
        reflected = rs * rs / rho
        return [np.array([reflected, m]), np.array([2.0 * rs - rho, m]),
                np.array([3.0 * reflected, m])]

    def source_zeros(self):
        # zeros of A'(x) = c1 w pi sin(w pi x)
        k0 = math.ceil(self.x_L * self.area_omega - 1e-12)
        k1 = math.floor(self.x_R * self.area_omega + 1e-12)
        return np.array([k / self.area_omega for k in range(k0, k1 + 1)])

    def sample_states(self, rng, size):
        rho = rng.uniform(0.5, 3.0, size)
        u = rng.uniform(-3.0, 3.0, size)
        return np.column_stack([rho, rho * u])

    def sample_pre_shock_states(self, rng, size):
        rho = rng.uniform(0.5, 3.0, size)
        c = np.sqrt(self.kappa * self.gamma * rho ** (self.gamma - 1.0))
        u = c * rng.uniform(1.1, 3.0, size)
        return np.column_stack([rho, rho * u])

    def reference_end_states(self):
        left = np.array([self.rho_left, self.m_left])
        m_right = self.m_left * self.area(self.x_L) / self.area(self.x_R)
        return left, np.array([self.rho_right, m_right])

    def lf_left(self, U_next):
        return np.array([self.rho_left, self.m_left])

    def lf_right(self, U_prev):
        return np.array([self.rho_right, U_prev[1]])


def isentropic_duct(**overrides):
    return IsentropicDuct(**overrides)


def isentropic_duct_multi(**overrides):
    params = dict(name="isentropic_duct_multi", area_c0=1.2, area_c1=0.2, area_omega=4.0)
    params.update(overrides)
    return IsentropicDuct(**params)


@dataclass(frozen=True)
class Nozzle(ConservationLaw1D):
    """Quasi-1D Euler flow in a nozzle of area ``A(x) = a0 + a1 (x - x_t)^2``.

    The conserved variables are ``U = (rho A, rho u A, E A)``.  In these
    variables the flux is the ordinary Euler flux, independent of ``x``,
    and the source is ``(0, p A'(x), 0)``.  The single free left parameter
    is the inflow velocity.
    """

    component_names = ("rhoA", "rhouA", "EA")

    name: str = "nozzle"
    gamma: float = 1.4
    R: float = 8.3144
    p_left: float = 1.0
    T_left: float = 300.0
    p_right: float = 0.6784
    area_a0: float = 1.0
    area_a1: float = 2.2
    throat: float = 1.5
    alpha_seed: float = 6.0
    x_L: float = 0.0
    x_R: float = 3.0
    n: int = 3

    @property
    def params(self):
        return {"gamma": self.gamma, "R": self.R, "p_left": self.p_left,
                "T_left": self.T_left, "p_right": self.p_right,
                "area_a0": self.area_a0, "area_a1": self.area_a1,
                "throat": self.throat, "alpha_seed": self.alpha_seed}

    @property
    def rho_left(self):
        return self.p_left / (self.R * self.T_left)

    @property
    def boundary(self):
        return BoundarySpec(
            left=lambda alphas: self.state_from_primitive(
                self.rho_left, alphas[0], self.p_left, self.x_L),
            n_alpha=1,
            right=(RightCondition("p(x_R)", lambda U: self.pressure(U, self.x_R) - self.p_right,
                                  self.p_right),),
            alpha_names=("u_left",),
            alpha_seed=(self.alpha_seed,),
        )

    def area(self, x):
        return self.area_a0 + self.area_a1 * (x - self.throat) ** 2

    def darea(self, x):
        return 2.0 * self.area_a1 * (x - self.throat)

    def source_zeros(self):
        return np.array([self.throat])

    def state_from_primitive(self, rho, u, p, x):
        A = self.area(x)
        E = p / (self.gamma - 1.0) + 0.5 * rho * u * u
        return np.array([rho * A, rho * u * A, E * A])

    def primitive(self, U, x):
        """Return ``(rho, u, p)`` at position ``x``."""
        A = self.area(x)
        q1, q2, q3 = U
        u = q2 / q1
        return q1 / A, u, (self.gamma - 1.0) * (q3 - 0.5 * q2 * u) / A

    def pressure(self, U, x):
        return self.primitive(U, x)[2]

    def _scaled_pressure(self, U):
        q1, q2, q3 = U
        return (self.gamma - 1.0) * (q3 - 0.5 * q2 * q2 / q1)

    def check_state(self, U):
        if not (U[0] > 0.0 and self._scaled_pressure(U) > 0.0):
            raise HyperbolicityError("non-positive density or pressure", state=U)

    def flux(self, U):
        q1, q2, q3 = U
        P = self._scaled_pressure(U)
        u = q2 / q1
        return np.array([q2, q2 * u + P, u * (q3 + P)])

    def jacobian(self, U):
        g = self.gamma
        q1, q2, q3 = U
        u = q2 / q1
        H = (q3 + self._scaled_pressure(U)) / q1
        return np.array([
            [0.0, 1.0, 0.0],
            [0.5 * (g - 3.0) * u * u, (3.0 - g) * u, g - 1.0],
            [u * (0.5 * (g - 1.0) * u * u - H), H - (g - 1.0) * u * u, g * u],
        ])

    def source(self, U, x):
        P = self._scaled_pressure(U)
        return np.array([0.0, P * self.darea(x) / self.area(x), 0.0])

    def flux_batch(self, U):
        q1, q2, q3 = U[:, 0], U[:, 1], U[:, 2]
        P = (self.gamma - 1.0) * (q3 - 0.5 * q2 * q2 / q1)
        u = q2 / q1
        return np.column_stack([q2, q2 * u + P, u * (q3 + P)])

    def source_batch(self, U, x):
        q1, q2, q3 = U[:, 0], U[:, 1], U[:, 2]
        P = (self.gamma - 1.0) * (q3 - 0.5 * q2 * q2 / q1)
        z = np.zeros_like(q1)
        return np.column_stack([z, P * self.darea(x) / self.area(x), z])

    def speed_batch(self, U):
        q1, q2, q3 = U[:, 0], U[:, 1], U[:, 2]
        P = (self.gamma - 1.0) * (q3 - 0.5 * q2 * q2 / q1)
        return np.abs(q2 / q1) + np.sqrt(self.gamma * np.abs(P) / q1)

    def _u_c_H(self, U):
        q1, q2, q3 = U
        P = self._scaled_pressure(U)
        if not (q1 > 0.0 and P > 0.0):
            raise HyperbolicityError("non-positive density or pressure", state=U)
        u = q2 / q1
        c = math.sqrt(self.gamma * P / q1)
        H = (q3 + P) / q1
        return u, c, H

    def eigenvalues(self, U):
        u, c, _ = self._u_c_H(U)
        return np.array([u - c, u, u + c])

    def eigen(self, U):
        u, c, H = self._u_c_H(U)
        b1 = (self.gamma - 1.0) / (c * c)
        b2 = 0.5 * b1 * u * u
        P = np.array([[1.0, 1.0, 1.0],
                      [u - c, u, u + c],
                      [H - u * c, 0.5 * u * u, H + u * c]])
        Pinv = np.array([
            [0.5 * (b2 + u / c), -0.5 * (b1 * u + 1.0 / c), 0.5 * b1],
            [1.0 - b2, b1 * u, -b1],
            [0.5 * (b2 - u / c), -0.5 * (b1 * u - 1.0 / c), 0.5 * b1],
        ])
        return np.array([u - c, u, u + c]), P, Pinv

    def shock_guesses(self, U):
        # Prandtl relation u- u+ = c*^2 with c*^2 = 2 (g-1)/(g+1) H
        g = self.gamma
        q1, q2, q3 = U
        u, c, H = self._u_c_H(U)
        F = self.flux(U)
        cstar2 = 2.0 * (g - 1.0) / (g + 1.0) * H
        u_plus = cstar2 / u
        q1p = q2 / u_plus
        Pp = F[1] - q2 * u_plus
        q3p = Pp / (g - 1.0) + 0.5 * q1p * u_plus * u_plus
        return [np.array([q1p, q2, q3p])]

    def sample_states(self, rng, size):
        rho = rng.uniform(2e-4, 2e-3, size)
        p = rng.uniform(0.2, 2.0, size)
        c = np.sqrt(self.gamma * p / rho)
        u = c * rng.uniform(-2.0, 2.0, size)
        A = rng.uniform(1.0, 6.0, size)
        E = p / (self.gamma - 1.0) + 0.5 * rho * u * u
        return np.column_stack([rho * A, rho * u * A, E * A])

    def sample_pre_shock_states(self, rng, size):
        rho = rng.uniform(2e-4, 2e-3, size)
        p = rng.uniform(0.2, 2.0, size)
        c = np.sqrt(self.gamma * p / rho)
        u = c * rng.uniform(1.1, 3.0, size)
        A = rng.uniform(1.0, 6.0, size)
        E = p / (self.gamma - 1.0) + 0.5 * rho * u * u
        return np.column_stack([rho * A, rho * u * A, E * A])

    def reference_end_states(self):
        rho_r = self.p_right / (self.R * self.T_left)
        u_l = self.alpha_seed
        u_r = self.rho_left * u_l * self.area(self.x_L) / (rho_r * self.area(self.x_R))
        return (self.state_from_primitive(self.rho_left, u_l, self.p_left, self.x_L),
                self.state_from_primitive(rho_r, u_r, self.p_right, self.x_R))

    def lf_left(self, U_next):
        _, u, _ = self.primitive(U_next, self.x_L)
        return self.state_from_primitive(self.rho_left, u, self.p_left, self.x_L)

    def lf_right(self, U_prev):
        rho, u, _ = self.primitive(U_prev, self.x_R)
        return self.state_from_primitive(rho, u, self.p_right, self.x_R)


def nozzle(**overrides):
    return Nozzle(**overrides)


# ---------------------------------------------------------------------------
# Evaluation helpers
# ---------------------------------------------------------------------------

def _as_state(model, U):
    U = np.asarray(U, dtype=float)
    if U.shape != (model.n,):
        raise DomainError(f"state must have shape ({model.n},), got {U.shape}", state=U)
    if not np.all(np.isfinite(U)):
        raise DomainError("non-finite state", state=U)
    return U


def eval_flux(model, U):
    """Flux ``f(U)`` of a 1D model."""
    return model.flux(_as_state(model, U))


def eval_eigen(model, U):
    """Return ``(eigenvalues ascending, P, P^-1)`` for a 1D model."""
    U = _as_state(model, U)
    lam, P, Pinv = model.eigen(U)
    if not np.all(np.isfinite(lam)):
        raise HyperbolicityError("complex or non-finite eigenvalues", state=U)
    return lam, P, Pinv


def invert_flux(model, V, guess, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
    """Solve ``f(U) = V`` by Newton's method warm-started at ``guess``.

    Convergence is declared when ``||f(U) - V||_inf <= tol * max(1, ||V||_inf)``.
    The root found is the one in the basin of ``guess``; for non-monotone
    fluxes this is how branches are selected.
    """
    V = np.asarray(V, dtype=float)
    U = np.array(guess, dtype=float)
    if not (np.all(np.isfinite(V)) and np.all(np.isfinite(U))):
        raise DomainError("non-finite input to flux inversion", V=V, guess=U)
    scale = tol * max(1.0, float(np.max(np.abs(V))))
    res = np.inf
    for _ in range(max_iter):
        r = model.flux(U) - V
        res = float(np.max(np.abs(r)))
        if not math.isfinite(res):
            break
        if res <= scale:
            return U
        J = model.jacobian(U)
        try:
            if model.n == 1:
                if J[0, 0] == 0.0:
                    raise np.linalg.LinAlgError
                dU = r / J[0, 0]
            else:
                dU = np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            raise NearSonicError("singular flux Jacobian during inversion",
                                 state=U, residual=res) from None
        U = U - dU
        if not np.all(np.isfinite(U)):
            break
    raise InversionError("flux inversion did not converge", residual=res, V=V)


# ---------------------------------------------------------------------------
# 2D models
# ---------------------------------------------------------------------------

SIDES = ("left", "right", "bottom", "top")


@dataclass(frozen=True)
class PolyFlux:
    """Cubic flux ``c0 + c1 u + c2 u^2 + c3 u^3`` with analytic critical points."""

    coef: tuple

    def __post_init__(self):
        c = tuple(float(v) for v in self.coef) + (0.0,) * (4 - len(self.coef))
        if len(c) != 4:
            raise ConfigError("PolyFlux takes at most four coefficients", coef=self.coef)
        object.__setattr__(self, "coef", c)

    def __call__(self, u):
        c0, c1, c2, c3 = self.coef
        return ((c3 * u + c2) * u + c1) * u + c0

    def derivative(self, u):
        _, c1, c2, c3 = self.coef
        return (3.0 * c3 * u + 2.0 * c2) * u + c1

    @property
    def critical_points(self):
        _, c1, c2, c3 = self.coef
        if c3 != 0.0:
            disc = 4.0 * c2 * c2 - 12.0 * c3 * c1
            if disc < 0.0:
                return ()
            r = math.sqrt(disc)
            return tuple(sorted(((-2.0 * c2 - r) / (6.0 * c3), (-2.0 * c2 + r) / (6.0 * c3))))
        if c2 != 0.0:
            return (-c1 / (2.0 * c2),)
        return ()


@njit(cache=True)
def zero_source(u, x, y, p):
    return 0.0


@njit(cache=True)
def burgers2d_source(u, x, y, p):
    # u (1 - phi'(x)) psi'(y - phi(x)) with phi = .5 + .5 cos(pi x), psi(z) = -sin(pi z)
    pi = np.pi
    phi = 0.5 + 0.5 * np.cos(pi * x)
    dphi = -0.5 * pi * np.sin(pi * x)
    return u * (1.0 - dphi) * (-pi * np.cos(pi * (y - phi)))


def _burgers2d_source_np(u, x, y):
    pi = np.pi
    phi = 0.5 + 0.5 * np.cos(pi * x)
    dphi = -0.5 * pi * np.sin(pi * x)
    return u * (1.0 - dphi) * (-pi * np.cos(pi * (y - phi)))


@dataclass(frozen=True)
class ScalarLaw2D:
    """Scalar law ``f(u)_x + g(u)_y = a(u, x, y)`` on a rectangle.

    Fluxes are cubic polynomials, so their critical points are exact and
    the Godunov flux is exact for non-convex fluxes.  The source is given
    twice: as a numpy callable and as a compiled kernel taking a parameter
    tuple.  ``boundary`` maps a side name to a callable of the coordinate
    along that side; ``plan`` lists the sweeps and merges that assemble the
    steady solution.
    """

    name: str
    flux_x: PolyFlux
    flux_y: PolyFlux
    xlim: tuple
    ylim: tuple
    boundary: dict
    plan: dict
    source_np: Optional[Callable] = None
    source_jit: Optional[Callable] = None
    source_params: tuple = (0.0,)
    exact: Optional[Callable] = None
    exact_curves: tuple = ()
    params: dict = field(default_factory=dict)
    n: int = 1

    def f(self, u):
        return self.flux_x(u)

    def df(self, u):
        return self.flux_x.derivative(u)

    def g(self, u):
        return self.flux_y(u)

    def dg(self, u):
        return self.flux_y.derivative(u)

    @property
    def f_crit(self):
        return self.flux_x.critical_points

    @property
    def g_crit(self):
        return self.flux_y.critical_points

    @property
    def has_source(self):
        return self.source_np is not None

    def source(self, u, x, y):
        if self.source_np is None:
            return np.zeros(np.broadcast(u, x, y).shape)
        return self.source_np(u, x, y)

    def boundary_values(self, side, coords):
        fn = self.boundary.get(side)
        if fn is None:
            return None
        coords = np.asarray(coords, dtype=float)
        return np.asarray(fn(coords), dtype=float) * np.ones(len(coords))

    def describe(self):
        return {"name": self.name, "dimension": 2, "n": 1,
                "domain": [list(self.xlim), list(self.ylim)],
                "params": {k: v for k, v in self.params.items() if not callable(v)},
                "plan": self.plan}


def three_states(u_left=0.75, alpha=1.2, perturbed=False, split=0.5, amplitude=0.2):
    """``(k u^2)_x + (u - u^3)_y = 0`` with three boundary states.

    ``k`` follows from the interior slope relation ``alpha = (1 - u_L^2) / (k u_L)``.
    """
    k = (1.0 - u_left ** 2) / (alpha * u_left)
    if perturbed:
        left = lambda y: u_left + amplitude * np.sin(np.pi * y)
    else:
        left = lambda y: u_left + 0.0 * y
    right = lambda y: -left(y)
    top = lambda x: np.where(x < split, u_left, -u_left)
    bottom = lambda x: 0.0 * x

    def exact(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        out = np.zeros(x.shape)
        out[(x < split) & (y > alpha * x)] = u_left
        out[(x >= split) & (y > alpha * (1.0 - x))] = -u_left
        return out

    name = "three_states_perturbed" if perturbed else "three_states"
    return ScalarLaw2D(
        name=name,
        flux_x=PolyFlux((0.0, 0.0, k)),
        flux_y=PolyFlux((0.0, 1.0, 0.0, -1.0)),
        xlim=(0.0, 1.0), ylim=(0.0, 1.0),
        boundary={"left": left, "right": right, "top": top, "bottom": bottom},
        plan={"sweeps": ["left", "bottom", "right"],
              "merges": [["left", "bottom", [0.0, 0.0]], ["merged", "right", [1.0, 0.0]]]},
        exact=None if perturbed else exact,
        exact_curves=() if perturbed else (("line", 0.0, 0.0, alpha), ("line", 1.0, 0.0, -alpha)),
        params={"u_left": u_left, "alpha": alpha, "k": k, "perturbed": perturbed,
                "split": split, "amplitude": amplitude},
    )


def three_states_perturbed(**overrides):
    overrides.setdefault("perturbed", True)
    return three_states(**overrides)


def burgers2d(u_left=2.0, u_right=-2.0):
    """2D Burgers ``(u^2/2)_x + (u^2/2)_y = u (1 - phi'(x)) psi'(y - phi(x))``.

    The exact solution is ``u_left + psi(y - phi)`` below ``y = phi(x)`` and
    ``u_right + psi(y - phi)`` above.
    """
    phi = lambda x: 0.5 + 0.5 * np.cos(np.pi * x)

    def exact(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        base = np.where(y < phi(x), u_left, u_right)
        return base - np.sin(np.pi * (y - phi(x)))

    return ScalarLaw2D(
        name="burgers2d",
        flux_x=PolyFlux((0.0, 0.0, 0.5)),
        flux_y=PolyFlux((0.0, 0.0, 0.5)),
        xlim=(0.0, 1.0), ylim=(0.0, 1.0),
        boundary={"left": lambda y: exact(0.0 * y, y), "right": lambda y: exact(1.0 + 0.0 * y, y),
                  "bottom": lambda x: exact(x, 0.0 * x), "top": lambda x: exact(x, 1.0 + 0.0 * x)},
        plan={"sweeps": ["bottom", "top"], "merges": [["bottom", "top", "auto"]]},
        source_np=_burgers2d_source_np,
        source_jit=burgers2d_source,
        exact=exact,
        exact_curves=(("graph", phi),),
        params={"u_left": u_left, "u_right": u_right},
    )


def scalar2d(u_left=1.5, u_right=-0.5):
    """``(u^2/2)_x + u_y = 0`` with bottom data ``1.5 - 2x``; one bottom sweep suffices."""

    def exact(x, y):
        x, y = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float))
        with np.errstate(divide="ignore", invalid="ignore"):
            fan = (1.5 - 2.0 * x) / (1.0 - 2.0 * y)
        below = np.where(x <= 1.5 * y, u_left, np.where(x >= 1.0 - 0.5 * y, u_right, fan))
        shock = 0.75 + 0.5 * (y - 0.5)
        return np.where(y < 0.5, below, np.where(x < shock, u_left, u_right))

    return ScalarLaw2D(
        name="scalar2d",
        flux_x=PolyFlux((0.0, 0.0, 0.5)),
        flux_y=PolyFlux((0.0, 1.0)),
        xlim=(0.0, 1.0), ylim=(0.0, 1.0),
        boundary={"left": lambda y: u_left + 0.0 * y, "right": lambda y: u_right + 0.0 * y,
                  "bottom": lambda x: 1.5 - 2.0 * x, "top": None},
        plan={"sweeps": ["bottom"], "merges": []},
        exact=exact if (u_left, u_right) == (1.5, -0.5) else None,
        exact_curves=(("graph_x", lambda y: 0.75 + 0.5 * (y - 0.5), 0.5),),
        params={"u_left": u_left, "u_right": u_right},
    )



@dataclass(frozen=True)
class Euler2D:
    """2D compressible Euler, ``U = (rho, rho u, rho v, E)``; vectorised over leading axes."""

    component_names = ("rho", "rho_u", "rho_v", "E")

    name: str = "euler2d_reflection"
    gamma: float = 1.4
    xlim: tuple = (0.0, 4.0)
    ylim: tuple = (0.0, 1.0)
    inflow: tuple = (1.0, 2.9, 0.0, 1.0 / 1.4)
    top_state: tuple = (1.69997, 2.61934, -0.50632, 1.528191)
    n: int = 4

    @property
    def params(self):
        return {"gamma": self.gamma, "inflow": list(self.inflow), "top_state": list(self.top_state)}

    @property
    def boundary(self):
        return {"left": ("state", self.conserved(*self.inflow)),
                "top": ("state", self.conserved(*self.top_state)),
                "bottom": ("reflect", None),
                "right": ("outflow", None)}

    plan = {"sweeps": ["left"], "merges": []}

    def conserved(self, rho, u, v, p):
        return np.array([rho, rho * u, rho * v, p / (self.gamma - 1.0) + 0.5 * rho * (u * u + v * v)])

    def primitive(self, U):
        U = np.asarray(U, dtype=float)
        rho = U[..., 0]
        u = U[..., 1] / rho
        v = U[..., 2] / rho
        p = (self.gamma - 1.0) * (U[..., 3] - 0.5 * rho * (u * u + v * v))
        return rho, u, v, p

    def sound_speed(self, U):
        rho, _, _, p = self.primitive(U)
        return np.sqrt(self.gamma * p / rho)

    def flux_x(self, U):
        rho, u, v, p = self.primitive(U)
        E = U[..., 3]
        return np.stack([rho * u, rho * u * u + p, rho * u * v, u * (E + p)], axis=-1)

    def flux_y(self, U):
        rho, u, v, p = self.primitive(U)
        E = U[..., 3]
        return np.stack([rho * v, rho * u * v, rho * v * v + p, v * (E + p)], axis=-1)

    def jacobian_x(self, U):
        g = self.gamma
        rho, u, v, p = self.primitive(U)
        H = (U[..., 3] + p) / rho
        q2 = u * u + v * v
        z = np.zeros_like(u)
        o = np.ones_like(u)
        rows = [
            [z, o, z, z],
            [0.5 * (g - 1.0) * q2 - u * u, (3.0 - g) * u, -(g - 1.0) * v, (g - 1.0) * o],
            [-u * v, v, u, z],
            [u * (0.5 * (g - 1.0) * q2 - H), H - (g - 1.0) * u * u, -(g - 1.0) * u * v, g * u],
        ]
        return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)

    def jacobian_y(self, U):
        g = self.gamma
        rho, u, v, p = self.primitive(U)
        H = (U[..., 3] + p) / rho
        q2 = u * u + v * v
        z = np.zeros_like(u)
        o = np.ones_like(u)
        rows = [
            [z, z, o, z],
            [-u * v, v, u, z],
            [0.5 * (g - 1.0) * q2 - v * v, -(g - 1.0) * u, (3.0 - g) * v, (g - 1.0) * o],
            [v * (0.5 * (g - 1.0) * q2 - H), -(g - 1.0) * u * v, H - (g - 1.0) * v * v, g * v],
        ]
        return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)

    def eigenvalues_x(self, U):
        c = self.sound_speed(U)
        _, u, _, _ = self.primitive(U)
        return np.stack([u - c, u, u, u + c], axis=-1)

    def eigenvalues_y(self, U):
        c = self.sound_speed(U)
        _, _, v, _ = self.primitive(U)
        return np.stack([v - c, v, v, v + c], axis=-1)

    def paraxial_speeds_x(self, U):
        """Characteristic slopes ``dy/dx``: eigenvalues of ``grad g (grad f)^-1``."""
        _, u, v, _ = self.primitive(U)
        c = self.sound_speed(U)
        disc = np.sqrt(np.maximum(u * u + v * v - c * c, 0.0))
        den = u * u - c * c
        return np.stack([(u * v - c * disc) / den, v / u, v / u, (u * v + c * disc) / den], axis=-1)

    def reflect(self, U):
        out = np.array(U, dtype=float, copy=True)
        out[..., 2] = -out[..., 2]
        return out

    def describe(self):
        return {"name": self.name, "dimension": 2, "n": 4,
                "domain": [list(self.xlim), list(self.ylim)], "params": self.params,
                "plan": self.plan}


def euler2d_reflection(**overrides):
    return Euler2D(**overrides)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

_REGISTRY = {
    "burgers1d_hj": (burgers1d_hj, "1D Burgers (v^2)_x = v obtained from u_x^2 = u; single shock at x = 1/2"),
    "isentropic_duct": (isentropic_duct, "isentropic duct flow, A = 1.2 - 0.4 cos(pi x); unique 1-shock"),
    "isentropic_duct_multi": (isentropic_duct_multi, "isentropic duct flow, A = 1.2 - 0.2 cos(4 pi x); four steady states"),
    "nozzle": (nozzle, "quasi-1D Euler nozzle with sonic throat and shock; inflow velocity unknown"),
    "three_states": (three_states, "(k u^2)_x + (u - u^3)_y = 0 with three constant boundary states"),
    "three_states_perturbed": (three_states_perturbed, "three-state problem with sinusoidal side data"),
    "burgers2d": (burgers2d, "2D Burgers with source; degenerate entropy case f = g"),
    "scalar2d": (scalar2d, "(u^2/2)_x + u_y = 0; one bottom sweep, shock forms inside"),
    "euler2d_reflection": (euler2d_reflection, "2D Euler oblique shock reflection; one left sweep"),
}


def list_models():
    """Catalog of built-in problems: identifier -> metadata."""
    out = {}
    for key, (factory, summary) in _REGISTRY.items():
        model = factory()
        info = model.describe()
        info.pop("params", None)
        info["summary"] = summary
        out[key] = info
    return out


def get_model(name, **overrides):
    """Instantiate a built-in model, applying parameter overrides."""
    try:
        factory = _REGISTRY[name][0]
    except KeyError:
        raise ConfigError(f"unknown problem {name!r}", known=sorted(_REGISTRY)) from None
    try:
        return factory(**overrides)
    except TypeError as exc:
        raise ConfigError(f"bad parameter override for {name!r}: {exc}") from None
