"""Marching of smooth 1D solution branches, including sonic (turning) points.

A branch is generated by forward Euler on the flux variable ``V = f(U)``::

    V_{j+1} = V_j + h a(U_j, x_j),     U_{j+1} = f^{-1}(V_{j+1})

with the inversion warm-started from ``U_j``.  Marching right-to-left uses
the same formula with ``h`` replaced by ``-h``.

Near a point where an eigenvalue ``lambda_i`` vanishes the march is stiff.
The guard trips when ``|lambda_i|`` falls below ``10 h |d lambda_i / dx|``,
where the derivative is the finite difference over the previous step.
A turning point is then located by a bordered Newton solve and crossed
with one backward Euler step.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import (
    ConfigError,
    DomainError,
    HyperbolicityError,
    InversionError,
    NoTurningPointError,
    StepError,
    SweepError,
    WrongRootError,
)
from .systems import NEWTON_MAX_ITER, NEWTON_TOL, eval_eigen, invert_flux

logger = logging.getLogger(__name__)

SONIC_GUARD = 10.0
TURNING_HORIZON = 5
MAX_GUARDED_STEPS = 50
SONIC_SNAP = 0.1


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid of ``N`` nodes on ``[x_L, x_R]``."""

    x_L: float
    x_R: float
    N: int

    def __post_init__(self):
        if not (self.x_L < self.x_R):
            raise ConfigError("grid requires x_L < x_R", x_L=self.x_L, x_R=self.x_R)
        if int(self.N) != self.N or self.N < 2:
            raise ConfigError("grid requires N >= 2", N=self.N)

    @classmethod
    def for_model(cls, model, N):
        return cls(model.x_L, model.x_R, int(N))

    @property
    def h(self):
        return (self.x_R - self.x_L) / (self.N - 1)

    @property
    def nodes(self):
        return np.linspace(self.x_L, self.x_R, self.N)

    def x(self, j):
        return self.x_L + j * self.h

    def index_of(self, x):
        """Nearest node index to ``x``, clipped to the grid."""
        j = int(round((x - self.x_L) / self.h))
        return min(max(j, 0), self.N - 1)


@dataclass(frozen=True)
class TurningPoint:
    """Sonic point ``lambda_i(U_T) = 0`` reached from node ``node`` at ``x_from``."""

    x_T: float
    U_T: np.ndarray
    field_index: int
    compat_residual: float
    node: int
    x_from: float
    U_from: np.ndarray
    direction: int = 1

    def to_dict(self):
        return {"x_T": self.x_T, "U_T": self.U_T.tolist(), "field_index": self.field_index,
                "compat_residual": self.compat_residual, "node": self.node}


@dataclass
class Branch1D:
    """States of a smooth branch on a grid.

    Invalid nodes hold ``nan``.  Valid nodes form a prefix for left-origin
    branches and a suffix for right-origin ones.  ``terminal`` records a
    turning point at which the march stopped without crossing.
    """

    grid: Grid1D
    states: np.ndarray
    valid: np.ndarray
    start: int
    direction: int = 1
    turning_points: List[TurningPoint] = field(default_factory=list)
    terminal: Optional[TurningPoint] = None
    stop_reason: str = "complete"

    @property
    def last(self):
        """Index of the furthest valid node from the origin."""
        idx = np.flatnonzero(self.valid)
        if idx.size == 0:
            return None
        return int(idx[-1] if self.direction > 0 else idx[0])

    @property
    def complete(self):
        end = self.grid.N - 1 if self.direction > 0 else 0
        return bool(self.valid[end])

    def state(self, j):
        if not self.valid[j]:
            raise DomainError("node outside the valid part of the branch", node=j)
        return self.states[j]

    def end_point(self):
        """``(x_*, U_*)``: turning point if the march stopped at one, else the last valid node."""
        if self.terminal is not None:
            return self.terminal.x_T, self.terminal.U_T
        j = self.last
        return self.grid.x(j), self.states[j]

    def eigenvalues(self, model):
        out = np.full(self.states.shape, np.nan)
        for j in np.flatnonzero(self.valid):
            out[j] = model.eigenvalues(self.states[j])
        return out


def _eig(model, U):
    model.check_state(U)
    lam = model.eigenvalues(U)
    if not np.all(np.isfinite(lam)):
        raise HyperbolicityError("non-finite eigenvalues", state=U)
    return lam


def compat_residual(model, U, x, i):
    """Component ``i`` of ``P^{-1} a(U, x)``: the source projected on field ``i``."""
    _, _, Pinv = eval_eigen(model, U)
    return float(Pinv[i] @ model.source(np.asarray(U, dtype=float), x))


def _grad_eig(model, U, i):
    g = np.empty(model.n)
    for c in range(model.n):
        d = 1e-7 * max(1.0, abs(U[c]))
        Up = U.copy()
        Um = U.copy()
        Up[c] += d
        Um[c] -= d
        g[c] = (model.eigenvalues(Up)[i] - model.eigenvalues(Um)[i]) / (2.0 * d)
    return g


def _source_jacobian(model, U, x):
    n = model.n
    J = np.empty((n, n))
    for c in range(n):
        d = 1e-7 * max(1.0, abs(U[c]))
        Up = U.copy()
        Um = U.copy()
        Up[c] += d
        Um[c] -= d
        J[:, c] = (model.source(Up, x) - model.source(Um, x)) / (2.0 * d)
    return J


def locate_turning_point(model, branch, j, i, horizon=TURNING_HORIZON):
    """Solve for the sonic point ``(x_T, U_T)`` ahead of node ``j`` in field ``i``.

    The ``n + 1`` equations are
    ``f(U_T) - f(U_j) = (x_T - x_j) a(U_j, x_j)`` and ``lambda_i(U_T) = 0``.

    Raises
    ------
    NoTurningPointError
        If Newton fails or ``x_T`` lies outside ``horizon`` cells ahead.
    """
    grid = branch.grid
    d = branch.direction
    h = grid.h
    U_j = np.array(branch.states[j], dtype=float)
    x_j = grid.x(j)
    a_j = model.source(U_j, x_j)
    F_j = model.flux(U_j)
    n = model.n
    scale = max(1.0, float(np.max(np.abs(F_j))))
    lam_scale = max(1.0, float(np.max(np.abs(model.eigenvalues(U_j)))))

    U = U_j.copy()
    s = 0.0  # x_T - x_j
    converged = False
    for _ in range(NEWTON_MAX_ITER):
        try:
            lam = _eig(model, U)
        except SweepError:
            break
        r = np.empty(n + 1)
        r[:n] = model.flux(U) - F_j - s * a_j
        r[n] = lam[i]
        if np.max(np.abs(r[:n])) <= NEWTON_TOL * scale and abs(r[n]) <= NEWTON_TOL * lam_scale:
            converged = True
            break
        M = np.zeros((n + 1, n + 1))
        M[:n, :n] = model.jacobian(U)
        M[:n, n] = -a_j
        M[n, :n] = _grad_eig(model, U, i)
        try:
            step = np.linalg.solve(M, r)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(M, r, rcond=None)[0]
        # keep the iterate within a few cells of the start
        lim = 2.0 * horizon * h
        if abs(step[n]) > lim:
            step *= lim / abs(step[n])
        U = U - step[:n]
        s = s - step[n]
        if not (np.all(np.isfinite(U)) and math.isfinite(s)):
            break
    if not converged:
        raise NoTurningPointError("turning-point Newton solve failed", node=j, field=i)
    if not (0.0 < d * s <= horizon * h * (1.0 + 1e-9)):
        raise NoTurningPointError("turning point outside the search horizon",
                                  node=j, field=i, x_T=x_j + s)
    x_T = x_j + s
    return TurningPoint(x_T=x_T, U_T=U, field_index=i,
                        compat_residual=compat_residual(model, U, x_T, i),
                        node=j, x_from=x_j, U_from=U_j, direction=d)


def step_past_turning(model, tp, next_x):
    """One backward Euler step from the turning point to ``next_x``.

    Solves ``f(U) - f(U_T) = (next_x - x_T) a(U, next_x)`` starting from
    the linear extrapolation through ``(x_j, U_j)`` and ``(x_T, U_T)``.  A
    result whose ``lambda_i`` has the pre-sonic sign is rejected and the
    solve retried from the reflected guess ``2 U_T - U_j``.
    """
    dx = next_x - tp.x_T
    if dx == 0.0:
        return tp.U_T.copy()
    if dx * tp.direction < 0.0:
        raise StepError("next_x lies behind the turning point", next_x=next_x, x_T=tp.x_T)
    i = tp.field_index
    pre_sign = np.sign(model.eigenvalues(tp.U_from)[i])
    w = (next_x - tp.x_from) / (tp.x_T - tp.x_from)
    guesses = [w * tp.U_T + (1.0 - w) * tp.U_from, 2.0 * tp.U_T - tp.U_from]
    F_T = model.flux(tp.U_T)
    scale = max(1.0, float(np.max(np.abs(F_T))))
    wrong = False
    for guess in guesses:
        U = np.array(guess, dtype=float)
        ok = False
        for _ in range(NEWTON_MAX_ITER):
            try:
                model.check_state(U)
            except SweepError:
                break
            r = model.flux(U) - F_T - dx * model.source(U, next_x)
            if np.max(np.abs(r)) <= NEWTON_TOL * scale:
                ok = True
                break
            M = model.jacobian(U) - dx * _source_jacobian(model, U, next_x)
            try:
                U = U - np.linalg.solve(M, r)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(U)):
                break
        if not ok:
            continue
        lam = _eig(model, U)[i]
        if np.sign(lam) == -pre_sign and lam != 0.0:
            return U
        wrong = True
    if wrong:
        raise WrongRootError("backward Euler step returned the pre-sonic root", x=next_x)
    raise StepError("backward Euler step past the turning point diverged", x=next_x)


def _forward_step(model, U, x, h_signed):
    V = model.flux(U) + h_signed * model.source(U, x)
    U_new = invert_flux(model, V, U)
    lam = _eig(model, U_new)
    return U_new, lam


def propagate(model, U0, grid, x_from=None, x_to=None, cross_sonic=False,
              guard_factor=SONIC_GUARD, horizon=TURNING_HORIZON):
    """March a smooth branch from ``x_from`` to ``x_to``.

    Parameters
    ----------
    model : ConservationLaw1D
    U0 : array_like
        State at ``x_from``.
    grid : Grid1D
    x_from, x_to : float, optional
        Start and end positions, snapped to nodes.  Default ``x_L`` to
        ``x_R``; ``x_from > x_to`` marches right to left.
    cross_sonic : bool
        If False the march stops at the first sonic point, recording it in
        ``branch.terminal`` when it can be located.  If True turning points
        are crossed with ``step_past_turning``.

    Returns
    -------
    Branch1D
    """
    x_from = grid.x_L if x_from is None else x_from
    x_to = grid.x_R if x_to is None else x_to
    j0, j1 = grid.index_of(x_from), grid.index_of(x_to)
    d = 1 if j1 >= j0 else -1
    U0 = np.array(U0, dtype=float)
    if U0.shape != (model.n,) or not np.all(np.isfinite(U0)):
        raise DomainError("initial state must be finite with shape (n,)", state=U0)

    states = np.full((grid.N, model.n), np.nan)
    valid = np.zeros(grid.N, dtype=bool)
    states[j0] = U0
    valid[j0] = True
    branch = Branch1D(grid=grid, states=states, valid=valid, start=j0, direction=d)
    lam = _eig(model, U0)
    if j0 == j1:
        return branch

    h = d * grid.h
    suppressed = np.zeros(model.n, dtype=bool)
    prev_lam = None
    j = j0
    while j != j1:
        x_j = grid.x(j)
        U_j = states[j]
        # guard check on the current node
        trip = None
        if prev_lam is not None:
            thresh = guard_factor * np.abs(lam - prev_lam)
            low = np.abs(lam) < thresh
            suppressed &= low
            low &= ~suppressed
            if np.any(low):
                trip = int(np.argmin(np.where(low, np.abs(lam), np.inf)))
        if trip is None:
            try:
                U_new, lam_new = _forward_step(model, U_j, x_j, h)
            except SweepError as exc:
                branch.stop_reason = f"inversion failed: {exc}"
                break
            flip = (np.sign(lam_new) != np.sign(lam)) & ~suppressed
            if np.any(flip):
                # crossed a sonic value within one step without tripping
                trip = int(np.flatnonzero(flip)[0])
            else:
                prev_lam, lam = lam, lam_new
                j += d
                states[j] = U_new
                valid[j] = True
                continue

        # sonic region: try to locate the turning point, stepping unguarded meanwhile
        done = False
        for _ in range(MAX_GUARDED_STEPS):
            x_j = grid.x(j)
            U_j = states[j]
            tp = None
            try:
                tp = locate_turning_point(model, branch, j, trip, horizon=horizon)
            except SweepError:
                tp = None
            if tp is not None and d * (tp.x_T - grid.x(j + d)) <= 0.0:
                if not cross_sonic:
                    branch.terminal = tp
                    branch.stop_reason = "turning point"
                    done = True
                    break
                # a node sitting on the sonic point takes U_T; step past to the next one
                on_node = abs(grid.x(j + d) - tp.x_T) < SONIC_SNAP * grid.h and j + d != j1
                target = j + 2 * d if on_node else j + d
                try:
                    U_new = step_past_turning(model, tp, grid.x(target))
                    lam_new = _eig(model, U_new)
                except SweepError as exc:
                    branch.terminal = tp
                    branch.stop_reason = f"could not step past turning point: {exc}"
                    done = True
                    break
                branch.turning_points.append(tp)
                logger.debug("crossed sonic point x_T=%.6g field %d", tp.x_T, trip)
                suppressed[trip] = True
                prev_lam, lam = lam, lam_new
                if on_node:
                    j += d
                    states[j] = tp.U_T
                    valid[j] = True
                j += d
                states[j] = U_new
                valid[j] = True
                break
            try:
                U_new, lam_new = _forward_step(model, U_j, x_j, h)
            except SweepError as exc:
                branch.terminal = tp
                branch.stop_reason = f"sonic truncation: {exc}"
                done = True
                break
            if np.sign(lam_new[trip]) != np.sign(lam[trip]):
                branch.terminal = tp
                branch.stop_reason = "sonic truncation: eigenvalue changed sign"
                done = True
                break
            prev_lam, lam = lam, lam_new
            j += d
            states[j] = U_new
            valid[j] = True
            if j == j1:
                break
            thresh = guard_factor * abs(lam[trip] - prev_lam[trip])
            if abs(lam[trip]) >= thresh:
                break  # left the sonic region without crossing
        else:
            branch.stop_reason = "sonic truncation: guard region too long"
            done = True
        if done:
            break

    if not valid[j1] and branch.stop_reason == "complete":
        branch.stop_reason = "incomplete"
    return branch


def sweep_through(model, U0, grid, x_from=None, x_to=None, **kwargs):
    """``propagate`` with sonic crossing enabled."""
    return propagate(model, U0, grid, x_from, x_to, cross_sonic=True, **kwargs)


def one_step_residual(model, branch):
    """Per-node residual ``||f(U_{j+1}) - f(U_j) - h a(U_j, x_j)||_inf`` over valid steps.

    Steps adjacent to a crossed turning point use backward Euler and are
    reported as ``nan``.
    """
    g = branch.grid
    d = branch.direction
    out = np.full(g.N, np.nan)
    skip = {tp.node + s * d for tp in branch.turning_points for s in (1, 2)}
    for j in np.flatnonzero(branch.valid):
        k = j + d
        if not (0 <= k < g.N) or not branch.valid[k] or k in skip:
            continue
        U, Un = branch.states[j], branch.states[k]
        out[j] = np.max(np.abs(model.flux(Un) - model.flux(U) - d * g.h * model.source(U, g.x(j))))
    return out
