"""Independent reference solutions.

* Lax-Friedrichs time evolution to steady state, in 1D and 2D.
* A plain bisection root finder used to mint test values.
* An RK4 integrator of ``dU/dx = (grad f)^-1 a`` for smooth branches.
* Closed-form oracles for the duct and nozzle problems built on mass,
  total enthalpy and the normal-shock relations (solved with ``brentq``).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import BracketError, ConfigError, DivergenceError

CFL = 0.45
STEADY_TOL = 1e-8
MAX_STEPS = 1_000_000
PATIENCE = 20_000


@dataclass
class EvolutionRun:
    """Outcome of a time evolution run.

    ``history`` holds the steady residual
    ``max_c mean|U^{n+1}_c - U^n_c| / (dt scale_c)`` at every step.
    """

    grid: object
    cfl: float
    steady_tol: float
    max_steps: int
    steps: int
    converged: bool
    history: np.ndarray
    states: np.ndarray
    wall_time: float
    reason: str = ""

    @property
    def final_residual(self):
        return float(self.history[-1]) if self.history.size else 0.0

    def summary(self):
        return {"steps": self.steps, "converged": self.converged,
                "final_residual": self.final_residual, "cfl": self.cfl,
                "steady_tol": self.steady_tol, "wall_time": self.wall_time,
                "reason": self.reason}


def _residual(dU, dt, scale):
    axes = tuple(range(dU.ndim - 1))
    return float(np.max(np.mean(np.abs(dU), axis=axes) / (dt * scale)))


def _run_loop(step, U, cfl, steady_tol, max_steps, patience, grid):
    t0 = time.perf_counter()
    scale0 = float(np.max(np.abs(U))) + 1.0
    hist = []
    best, best_at = math.inf, 0
    converged = False
    reason = "max_steps"
    n = 0
    for n in range(1, max_steps + 1):
        U_new, dt = step(U)
        if not np.all(np.isfinite(U_new)) or np.max(np.abs(U_new)) > 1e8 * scale0:
            raise DivergenceError("time evolution blew up", step=n)
        axes = tuple(range(U.ndim - 1))
        scale = np.maximum(np.max(np.abs(U_new), axis=axes), 1e-300)
        r = _residual(U_new - U, dt, scale)
        hist.append(r)
        U = U_new
        if r <= steady_tol:
            converged = True
            reason = "steady"
            break
        if r < 0.99 * best:
            best, best_at = r, n
        elif n - best_at > patience:
            reason = "stagnated"
            break
    return EvolutionRun(grid=grid, cfl=cfl, steady_tol=steady_tol, max_steps=max_steps,
                        steps=n, converged=converged, history=np.array(hist), states=U,
                        wall_time=time.perf_counter() - t0, reason=reason)


def initial_field_1d(model, grid):
    """Linear interpolation between the model's two end states."""
    UL, UR = model.reference_end_states()
    t = ((grid.nodes - grid.x_L) / (grid.x_R - grid.x_L))[:, None]
    return (1.0 - t) * UL[None, :] + t * UR[None, :]


def evolve_lf_1d(model, grid, init=None, cfl=CFL, steady_tol=STEADY_TOL,
                 max_steps=MAX_STEPS, patience=PATIENCE, local=False):
    """March ``U_t + f(U)_x = a`` to steady state with the Lax-Friedrichs flux.

    The numerical flux is ``(f_l + f_r)/2 - s (U_r - U_l)/2`` with ``s`` the
    largest wave speed on the grid, or the larger of the two neighbouring
    speeds when ``local`` is set.  The source is added explicitly.  End
    nodes are reset each step by the model's boundary closure.
    """
    if not 0.0 < cfl < 1.0:
        raise ConfigError("cfl must lie in (0, 1)", cfl=cfl)
    x = grid.nodes
    h = grid.h
    U = initial_field_1d(model, grid) if init is None else np.array(init, dtype=float)
    if U.shape != (grid.N, model.n) or not np.all(np.isfinite(U)):
        raise ConfigError("initial field must be finite with shape (N, n)")

    def step(U):
        sp = model.speed_batch(U)
        s = float(np.max(sp))
        dt = cfl * h / s
        if local:
            s = np.maximum(sp[1:], sp[:-1])[:, None]
        F = model.flux_batch(U)
        Fh = 0.5 * (F[1:] + F[:-1]) - 0.5 * s * (U[1:] - U[:-1])
        Un = U.copy()
        Un[1:-1] = U[1:-1] - dt / h * (Fh[1:] - Fh[:-1]) + dt * model.source_batch(U[1:-1], x[1:-1])
        Un[0] = model.lf_left(Un[1])
        Un[-1] = model.lf_right(Un[-2])
        return Un, dt

    return _run_loop(step, U, cfl, steady_tol, max_steps, patience, grid)


# ---------------------------------------------------------------------------
# 2D
# ---------------------------------------------------------------------------

def _scalar_closure(model, grid):
    """Per-side Dirichlet values and inflow masks for a scalar 2D model."""
    X, Y = grid.mesh()
    out = {}
    for side in ("left", "right", "bottom", "top"):
        coords = grid.y if side in ("left", "right") else grid.x
        vals = model.boundary_values(side, coords)
        if vals is None:
            out[side] = None
            continue
        if side == "left":
            inflow = model.df(vals) > 0.0
        elif side == "right":
            inflow = model.df(vals) < 0.0
        elif side == "bottom":
            inflow = model.dg(vals) > 0.0
        else:
            inflow = model.dg(vals) < 0.0
        out[side] = (vals, np.asarray(inflow) * np.ones(len(coords), dtype=bool))
    return out


def initial_field_2d(model, grid):
    """Linear interpolation between opposite sides' boundary data."""
    if getattr(model, "n", 1) > 1:
        bot = model.conserved(*model.inflow)
        top = model.conserved(*model.top_state)
        t = ((grid.y - grid.ylim[0]) / (grid.ylim[1] - grid.ylim[0]))[:, None, None]
        return np.broadcast_to((1.0 - t) * bot + t * top, (grid.my, grid.mx, 4)).copy()
    X, Y = grid.mesh()
    tx = (X - grid.xlim[0]) / (grid.xlim[1] - grid.xlim[0])
    ty = (Y - grid.ylim[0]) / (grid.ylim[1] - grid.ylim[0])
    L = model.boundary_values("left", grid.y)
    R = model.boundary_values("right", grid.y)
    B = model.boundary_values("bottom", grid.x)
    T = model.boundary_values("top", grid.x)
    if L is not None and R is not None:
        u = (1.0 - tx) * L[:, None] + tx * R[:, None]
    elif B is not None and T is not None:
        u = (1.0 - ty) * B[None, :] + ty * T[None, :]
    else:
        side = next(v for v in (L, R) if v is not None) if (L is not None or R is not None) else None
        u = np.broadcast_to(side[:, None], X.shape).copy() if side is not None else \
            np.broadcast_to(B[None, :], X.shape).copy()
    return u[..., None].astype(float)


def evolve_lf_2d(model, grid, init=None, cfl=CFL, steady_tol=STEADY_TOL,
                 max_steps=MAX_STEPS, patience=PATIENCE):
    """Dimensional analogue of ``evolve_lf_1d`` on a rectangle.

    Scalar models impose side data only where the characteristic enters the
    domain and extrapolate elsewhere.  The Euler model uses its own side
    types: fixed state, mirror reflection and outflow.
    """
    if not 0.0 < cfl < 1.0:
        raise ConfigError("cfl must lie in (0, 1)", cfl=cfl)
    hx, hy = grid.hx, grid.hy
    X, Y = grid.mesh()
    U = initial_field_2d(model, grid) if init is None else np.array(init, dtype=float)
    n = U.shape[-1]
    system = n > 1

    if system:
        fx, fy = model.flux_x, model.flux_y

        def speeds(U):
            c = model.sound_speed(U)
            _, u, v, _ = model.primitive(U)
            return float(np.max(np.abs(u) + c)), float(np.max(np.abs(v) + c))

        def src(U):
            return 0.0

        bc = model.boundary
    else:
        fx = lambda U: model.f(U)
        fy = lambda U: model.g(U)

        def speeds(U):
            u = U[..., 0]
            return float(np.max(np.abs(model.df(u)))) + 1e-12, float(np.max(np.abs(model.dg(u)))) + 1e-12

        if model.has_source:
            def src(U):
                return model.source(U[..., 0], X, Y)[..., None]
        else:
            def src(U):
                return 0.0

        closure = _scalar_closure(model, grid)

    def pad(U):
        P = np.empty((U.shape[0] + 2, U.shape[1] + 2, n))
        P[1:-1, 1:-1] = U
        P[1:-1, 0] = U[:, 0]
        P[1:-1, -1] = U[:, -1]
        P[0, 1:-1] = U[0]
        P[-1, 1:-1] = U[-1]
        if system:
            if bc["bottom"][0] == "reflect":
                P[0, 1:-1] = model.reflect(U[1])
            for side, sl in (("left", (slice(1, -1), 0)), ("top", (-1, slice(1, -1)))):
                if bc[side][0] == "state":
                    P[sl] = bc[side][1]
        P[0, 0], P[0, -1], P[-1, 0], P[-1, -1] = P[1, 0], P[1, -1], P[-2, 0], P[-2, -1]
        return P

    def fix(U):
        if system:
            U[:, 0] = bc["left"][1]
            U[-1, :] = bc["top"][1]
            return U
        for side, idx in (("left", (slice(None), 0)), ("right", (slice(None), -1)),
                          ("bottom", (0, slice(None))), ("top", (-1, slice(None)))):
            c = closure[side]
            if c is None:
                continue
            vals, inflow = c
            cur = U[idx][..., 0]
            U[idx] = np.where(inflow, vals, cur)[..., None]
        return U

    U = fix(U.copy())

    def step(U):
        sx, sy = speeds(U)
        dt = cfl / (sx / hx + sy / hy)
        P = pad(U)
        Fx = fx(P[1:-1])
        Fy = fy(P[:, 1:-1])
        Hx = 0.5 * (Fx[:, 1:] + Fx[:, :-1]) - 0.5 * sx * (P[1:-1, 1:] - P[1:-1, :-1])
        Hy = 0.5 * (Fy[1:] + Fy[:-1]) - 0.5 * sy * (P[1:, 1:-1] - P[:-1, 1:-1])
        if not system:
            Hx = Hx if Hx.ndim == 3 else Hx[..., None]
            Hy = Hy if Hy.ndim == 3 else Hy[..., None]
        Un = U - dt / hx * (Hx[:, 1:] - Hx[:, :-1]) - dt / hy * (Hy[1:] - Hy[:-1]) + dt * src(U)
        return fix(Un), dt

    return _run_loop(step, U, cfl, steady_tol, max_steps, patience, grid)


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------

def oracle_scalar_root(fn, bracket, tol=1e-12):
    """Bisection: halve ``bracket`` until its width is at most ``tol``.

    Returns the midpoint of the final bracket.  The number of iterations is
    ``ceil(log2(width / tol))``.
    """
    a, b = float(bracket[0]), float(bracket[1])
    fa, fb = fn(a), fn(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if not (np.sign(fa) * np.sign(fb) < 0):
        raise BracketError("function does not change sign over the bracket",
                           bracket=[a, b], values=[fa, fb])
    while b - a > tol:
        m = 0.5 * (a + b)
        fm = fn(m)
        if fm == 0.0:
            return m
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b = m
    return 0.5 * (a + b)


def bisection_iterations(width, tol):
    return max(0, math.ceil(math.log2(width / tol)))


def rk4_branch(model, U0, x, substeps=8):
    """Integrate ``dU/dx = (grad f(U))^-1 a(U, x)`` with classical RK4.

    Returns states at the points ``x``; integration stops (``nan`` beyond)
    if the Jacobian becomes singular.
    """
    x = np.asarray(x, dtype=float)
    out = np.full((x.size, model.n), np.nan)
    U = np.array(U0, dtype=float)
    out[0] = U

    def rhs(U, xx):
        return np.linalg.solve(model.jacobian(U), model.source(U, xx))

    try:
        for j in range(x.size - 1):
            h = (x[j + 1] - x[j]) / substeps
            xx = x[j]
            for _ in range(substeps):
                k1 = rhs(U, xx)
                k2 = rhs(U + 0.5 * h * k1, xx + 0.5 * h)
                k3 = rhs(U + 0.5 * h * k2, xx + 0.5 * h)
                k4 = rhs(U + h * k3, xx + h)
                U = U + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
                xx += h
            if not np.all(np.isfinite(U)):
                break
            out[j + 1] = U
    except np.linalg.LinAlgError:
        pass
    return out


# isentropic duct -----------------------------------------------------------

def _duct_density(model, Q, B, x, supersonic):
    """Density from ``m A = Q`` and ``u^2/2 + kappa gamma/(gamma-1) rho^(gamma-1) = B``."""
    g, k = model.gamma, model.kappa
    m = Q / model.area(x)
    rs = model.sonic_density(m)
    fn = lambda r: 0.5 * (m / r) ** 2 + k * g / (g - 1.0) * r ** (g - 1.0) - B
    if fn(rs) > 0.0:
        return math.nan  # choked: no real state at this area
    if supersonic:
        lo = rs
        while fn(lo) < 0.0:
            lo *= 0.5
        return brentq(fn, lo, rs, xtol=1e-15, rtol=1e-14)
    hi = rs
    while fn(hi) < 0.0:
        hi *= 2.0
    return brentq(fn, rs, hi, xtol=1e-15, rtol=1e-14)


def _duct_invariants(model, U, x):
    rho, m = U
    g, k = model.gamma, model.kappa
    return m * model.area(x), 0.5 * (m / rho) ** 2 + k * g / (g - 1.0) * rho ** (g - 1.0)


def duct_exact_branch(model, U0, x0, x, supersonic):
    """Exact smooth duct branch through ``(x0, U0)`` at points ``x``."""
    Q, B = _duct_invariants(model, U0, x0)
    rho = np.array([_duct_density(model, Q, B, xi, supersonic) for xi in np.atleast_1d(x)])
    return np.column_stack([rho, Q / model.area(np.atleast_1d(x))])


def _duct_jump_density(model, rho, m):
    g, k = model.gamma, model.kappa
    P = m * m / rho + k * rho ** g
    fn = lambda r: m * m / r + k * r ** g - P
    rs = model.sonic_density(m)
    hi = 2.0 * rs * rs / rho + rs
    while fn(hi) < 0.0:
        hi *= 2.0
    return brentq(fn, rs, hi, xtol=1e-15, rtol=1e-14)


def duct_exit_density(model, x_S):
    """Exit density when a shock sits at ``x_S`` on the supersonic inflow branch."""
    U0 = np.array([model.rho_left, model.m_left])
    pre = duct_exact_branch(model, U0, model.x_L, [x_S], True)[0]
    if not np.isfinite(pre[0]):
        return math.nan
    rho_p = _duct_jump_density(model, pre[0], pre[1])
    post = duct_exact_branch(model, np.array([rho_p, pre[1]]), x_S, [model.x_R], False)[0]
    return post[0]


def duct_shock_oracle(model, samples=2001):
    """All shock positions giving ``rho(x_R) = rho_right``, by scanning and ``brentq``."""
    xs = np.linspace(model.x_L, model.x_R, samples)
    vals = np.array([duct_exit_density(model, x) - model.rho_right for x in xs])
    roots = []
    for a, b, fa, fb in zip(xs[:-1], xs[1:], vals[:-1], vals[1:]):
        if np.isfinite(fa) and np.isfinite(fb) and fa * fb < 0.0:
            roots.append(brentq(lambda x: duct_exit_density(model, x) - model.rho_right, a, b,
                                xtol=1e-13))
    return roots


def duct_exact_solution(model, x, x_S):
    """Exact piecewise solution with a shock at ``x_S``."""
    x = np.asarray(x, dtype=float)
    U0 = np.array([model.rho_left, model.m_left])
    out = np.empty((x.size, 2))
    left = x < x_S
    out[left] = duct_exact_branch(model, U0, model.x_L, x[left], True)
    pre = duct_exact_branch(model, U0, model.x_L, [x_S], True)[0]
    post0 = np.array([_duct_jump_density(model, *pre), pre[1]])
    out[~left] = duct_exact_branch(model, post0, x_S, x[~left], False)
    return out


# nozzle --------------------------------------------------------------------

def _area_mach(M, g):
    return (1.0 / M) * ((2.0 / (g + 1.0)) * (1.0 + 0.5 * (g - 1.0) * M * M)) ** ((g + 1.0) / (2.0 * (g - 1.0)))


def _mach_from_area(ratio, g, supersonic):
    fn = lambda M: _area_mach(M, g) - ratio
    if supersonic:
        return brentq(fn, 1.0, 50.0, xtol=1e-15)
    return brentq(fn, 1e-8, 1.0, xtol=1e-15)


def _total_pressure_ratio(M, g):
    """``p0_2 / p0_1`` across a normal shock with upstream Mach ``M``."""
    a = ((g + 1.0) * M * M / ((g - 1.0) * M * M + 2.0)) ** (g / (g - 1.0))
    b = ((g + 1.0) / (2.0 * g * M * M - (g - 1.0))) ** (1.0 / (g - 1.0))
    return a * b


def nozzle_oracle(model):
    """Choked inflow velocity, shock position and smooth exit pressures.

    Returns a dict with ``u_left``, ``x_S``, ``p_exit_supersonic`` and
    ``p_exit_subsonic`` (the isentropic exit pressures without a shock).
    """
    g, R = model.gamma, model.R
    A_star = model.area(model.throat)
    M0 = _mach_from_area(model.area(model.x_L) / A_star, g, False)
    c0 = math.sqrt(g * R * model.T_left)
    u_left = M0 * c0
    p01 = model.p_left * (1.0 + 0.5 * (g - 1.0) * M0 * M0) ** (g / (g - 1.0))
    ratio_e = model.area(model.x_R) / A_star
    p_static = lambda M, p0: p0 * (1.0 + 0.5 * (g - 1.0) * M * M) ** (-g / (g - 1.0))
    p_sup = p_static(_mach_from_area(ratio_e, g, True), p01)
    p_sub = p_static(_mach_from_area(ratio_e, g, False), p01)

    def exit_pressure(x_S):
        M1 = _mach_from_area(model.area(x_S) / A_star, g, True)
        p02 = p01 * _total_pressure_ratio(M1, g)
        A2 = A_star * p01 / p02
        Me = _mach_from_area(model.area(model.x_R) / A2, g, False)
        return p_static(Me, p02)

    x_S = math.nan
    if p_sup < model.p_right < p_sub:
        lo, hi = model.throat + 1e-9, model.x_R
        if (exit_pressure(lo) - model.p_right) * (exit_pressure(hi) - model.p_right) < 0:
            x_S = brentq(lambda x: exit_pressure(x) - model.p_right, lo, hi, xtol=1e-13)
    return {"u_left": u_left, "x_S": x_S, "p_exit_supersonic": p_sup,
            "p_exit_subsonic": p_sub, "p0": p01, "exit_pressure": exit_pressure}
