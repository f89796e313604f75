"""Stationary shocks in 1D: jump operator, shock placement and nested solves.

The jump operator maps a pre-shock state ``U-`` to the state ``U+ != U-``
with ``f(U+) = f(U-)`` that satisfies the Lax conditions for field ``k``::

    lambda_k(U+) < 0 < lambda_k(U-),
    lambda_{k-1}(U-) < 0 < lambda_{k+1}(U+).

A shock placed at node ``s`` splits the solution into the left branch on
``[x_L, x_s]`` and a post-shock branch started from ``Phi(U_s)``.  The
shock node is found by integer bisection on the right boundary residual.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import (
    BracketError,
    ConfigError,
    EntropyViolationError,
    InfeasibleError,
    NoShockError,
    NoSolutionInBracketError,
    StructureInfeasibleError,
    SweepError,
)
from .sweep1d import Branch1D, Grid1D, compat_residual, propagate
from .systems import NEWTON_MAX_ITER, NEWTON_TOL

logger = logging.getLogger(__name__)

BC_TOL_FACTOR = 10.0
ALPHA_BRACKET = 0.5
ALPHA_RTOL = 1e-12


def min_jump(U):
    return 1e-6 * (1.0 + float(np.max(np.abs(U))))


def bc_tol(grid, cond):
    """Right-boundary tolerance ``10 h`` times the condition's scale."""
    return BC_TOL_FACTOR * grid.h * cond.scale


@dataclass(frozen=True)
class JumpResult:
    U_minus: np.ndarray
    U_plus: np.ndarray
    rh_residual: float
    entropy_ok: bool
    field_index: int
    separation: float
    lam_minus: np.ndarray
    lam_plus: np.ndarray

    def entropy_margins(self):
        """Smallest slack in the Lax inequalities (positive when they hold)."""
        k = self.field_index
        m = [self.lam_minus[k], -self.lam_plus[k]]
        if k > 0:
            m.append(-self.lam_minus[k - 1])
        if k + 1 < len(self.lam_plus):
            m.append(self.lam_plus[k + 1])
        return float(min(m))

    def to_dict(self):
        return {"U_minus": self.U_minus.tolist(), "U_plus": self.U_plus.tolist(),
                "rh_residual": self.rh_residual, "entropy_ok": self.entropy_ok,
                "field_index": self.field_index, "separation": self.separation,
                "entropy_margin": self.entropy_margins()}


def default_field(lam):
    """Family of the smallest positive eigenvalue."""
    pos = np.flatnonzero(lam > 0.0)
    if pos.size == 0:
        return None
    return int(pos[np.argmin(lam[pos])])


def _newton_equal_flux(model, target, guess):
    U = np.array(guess, dtype=float)
    scale = NEWTON_TOL * max(1.0, float(np.max(np.abs(target))))
    for _ in range(NEWTON_MAX_ITER):
        try:
            model.check_state(U)
        except SweepError:
            return None
        r = model.flux(U) - target
        if np.max(np.abs(r)) <= scale:
            return U
        try:
            U = U - np.linalg.solve(model.jacobian(U), r)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(U)):
            return None
    return None


def _lax_ok(lam_m, lam_p, k):
    ok = lam_m[k] > 0.0 > lam_p[k]
    if k > 0:
        ok = ok and lam_m[k - 1] < 0.0
    if k + 1 < len(lam_p):
        ok = ok and lam_p[k + 1] > 0.0
    return bool(ok)


def jump(model, U_minus, k=None):
    """Entropy-satisfying stationary jump ``Phi(U_minus)``.

    Newton starts from model-specific guesses that reflect ``U_minus``
    about the sonic state; roots within ``min_jump`` of ``U_minus`` are
    discarded.

    Raises
    ------
    NoShockError
        Only the trivial root was found.
    EntropyViolationError
        A non-trivial root exists but violates the Lax conditions.
    """
    U_minus = np.asarray(U_minus, dtype=float)
    model.check_state(U_minus)
    lam_m = model.eigenvalues(U_minus)
    if k is None:
        k = default_field(lam_m)
        if k is None:
            raise EntropyViolationError("no positive eigenvalue: no stationary shock can enter",
                                        lam_minus=lam_m)
    target = model.flux(U_minus)
    tiny = min_jump(U_minus)
    found = None
    for guess in model.shock_guesses(U_minus):
        U = _newton_equal_flux(model, target, guess)
        if U is not None and np.max(np.abs(U - U_minus)) >= tiny:
            found = U
            break
    if found is None:
        raise NoShockError("only the trivial root of the jump condition was found",
                           U_minus=U_minus)
    lam_p = model.eigenvalues(found)
    res = JumpResult(U_minus=U_minus, U_plus=found,
                     rh_residual=float(np.max(np.abs(model.flux(found) - target))),
                     entropy_ok=_lax_ok(lam_m, lam_p, k), field_index=k,
                     separation=float(np.max(np.abs(found - U_minus))),
                     lam_minus=lam_m, lam_plus=lam_p)
    if not res.entropy_ok:
        raise EntropyViolationError("jump violates the Lax entropy conditions", field=k,
                                    lam_minus=lam_m, lam_plus=lam_p)
    return res


@dataclass
class ParameterVector:
    """Unknowns ``(alpha_1..alpha_I, x_S)`` with their matching functions.

    ``bindings`` lists ``(unknown, kind, index, side)`` in the order the
    matching functions are met from left to right.  ``kind`` is ``"compat"``
    (turning-point compatibility in field ``index``) or ``"bc"`` (right
    boundary condition ``index``); ``side`` is ``"pre"`` or ``"post"``
    relative to the shock.
    """

    alphas: tuple
    x_S: Optional[float]
    bindings: list
    brackets: dict = field(default_factory=dict)

    def to_dict(self):
        return {"alphas": list(self.alphas), "x_S": self.x_S,
                "bindings": [list(b) for b in self.bindings],
                "brackets": {k: list(v) for k, v in self.brackets.items()}}


def matching_table(I, J, k):
    """Bind each unknown to its matching function.

    Parameters
    ----------
    I : int
        Number of free left parameters.
    J : int
        Number of right boundary conditions.
    k : int
        Shock field, 1-based as in the characteristic ordering.
    """
    if not (1 <= k):
        raise ConfigError("shock field must be >= 1", k=k)
    rows = []
    # fields I..k cross a sonic point before the shock
    for i in range(I, k - 1, -1):
        rows.append((f"alpha_{i}", "compat", i - 1, "pre"))
    if k == J:
        rows.append(("x_S", "bc", k - 1, "post"))
    elif k > J:
        rows.append(("x_S", "compat", k - 1, "post"))
    else:
        raise StructureInfeasibleError("shock field below the number of right conditions",
                                       k=k, J=J)
    for i in range(k - 1, J, -1):
        rows.append((f"alpha_{i}", "compat", i - 1, "post"))
    for i in range(min(J, k - 1, I), 0, -1):
        rows.append((f"alpha_{i}", "bc", i - 1, "post"))
    unknowns = {r[0] for r in rows}
    expected = {f"alpha_{i}" for i in range(1, I + 1)} | {"x_S"}
    if unknowns != expected:
        raise StructureInfeasibleError("parameter count does not match the boundary data",
                                       I=I, J=J, k=k)
    return rows


@dataclass
class SteadySolution1D:
    """Piecewise smooth steady solution with at most one stationary shock.

    ``states`` holds the assembled field; nodes ``< shock_node`` come from
    the left branch and nodes ``>= shock_node`` from the post-shock branch.
    """

    model_name: str
    grid: Grid1D
    left: Branch1D
    post: Optional[Branch1D]
    shock_node: Optional[int]
    jump: Optional[JumpResult]
    params: ParameterVector
    bc_residual: np.ndarray
    feasible: bool = True
    reason: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def x_S(self):
        return None if self.shock_node is None else self.grid.x(self.shock_node)

    @property
    def states(self):
        out = self.left.states.copy()
        if self.post is not None:
            out[self.shock_node:] = self.post.states[self.shock_node:]
        return out

    @property
    def turning_points(self):
        tps = list(self.left.turning_points)
        if self.post is not None:
            tps += self.post.turning_points
        return tps

    def eigenvalues(self, model):
        S = self.states
        return np.array([model.eigenvalues(U) for U in S])

    def summary(self):
        out = {"model": self.model_name, "N": self.grid.N, "h": self.grid.h,
               "x_S": self.x_S, "shock_node": self.shock_node,
               "bc_residual": self.bc_residual.tolist(), "feasible": self.feasible,
               "parameters": self.params.to_dict(),
               "turning_points": [tp.to_dict() for tp in self.turning_points]}
        if self.jump is not None:
            out["jump"] = self.jump.to_dict()
        out.update(self.diagnostics)
        return out


def left_branch(model, grid, alphas=(), cross_sonic=True):
    U_L = model.boundary.left_state(alphas)
    return propagate(model, U_L, grid, cross_sonic=cross_sonic)


def shoot_with_shock(model, alphas, x_S, grid, k=None, branch=None):
    """Left branch up to ``x_S``, jump, then march to ``x_R``.

    Infeasible candidates (no admissible jump or an incomplete post-shock
    branch) are returned with ``feasible=False`` and an infinite residual.
    """
    if branch is None:
        branch = left_branch(model, grid, alphas)
    s = grid.index_of(x_S)
    J = model.boundary.n_right
    params = ParameterVector(tuple(alphas), grid.x(s), [])
    infinite = np.full(J, np.inf)
    if not branch.valid[s]:
        return SteadySolution1D(model.name, grid, branch, None, s, None, params, infinite,
                                False, "left branch invalid at x_S")
    if branch.turning_points and grid.x(s) <= max(tp.x_T for tp in branch.turning_points):
        # the shock must sit beyond every crossed sonic point
        return SteadySolution1D(model.name, grid, branch, None, s, None, params, infinite,
                                False, "shock before a turning point")
    try:
        jr = jump(model, branch.states[s], k)
    except SweepError as exc:
        return SteadySolution1D(model.name, grid, branch, None, s, None, params, infinite,
                                False, f"jump: {exc}")
    post = propagate(model, jr.U_plus, grid, grid.x(s), grid.x_R, cross_sonic=False)
    if not post.complete:
        return SteadySolution1D(model.name, grid, branch, post, s, jr, params, infinite,
                                False, f"post-shock branch: {post.stop_reason}")
    res = model.boundary.right_residual(post.states[-1])
    return SteadySolution1D(model.name, grid, branch, post, s, jr, params, res)


class _NodeResidual:
    """Cached residual of a bound matching function at shock node ``s``."""

    def __init__(self, model, grid, alphas, branch, k, cond_index, kind="bc"):
        self.model, self.grid, self.alphas = model, grid, alphas
        self.branch, self.k, self.ci, self.kind = branch, k, cond_index, kind
        self.cache = {}

    def __call__(self, s):
        if s not in self.cache:
            cand = shoot_with_shock(self.model, self.alphas, self.grid.x(s), self.grid,
                                    self.k, self.branch)
            if not cand.feasible:
                val = math.nan
            elif self.kind == "bc":
                val = float(cand.bc_residual[self.ci])
            else:
                x_e, U_e = cand.post.end_point()
                val = compat_residual(self.model, U_e, x_e, self.ci)
            self.cache[s] = (val, cand)
        return self.cache[s]


def _feasible_near(fn, s, lo, hi, reach=8):
    """Nearest node to ``s`` strictly inside ``(lo, hi)`` with a finite residual."""
    for off in range(0, reach + 1):
        for t in ((s + off, s - off) if off else (s,)):
            if lo < t < hi:
                v, _ = fn(t)
                if math.isfinite(v):
                    return t
    return None


def _feasible_end(fn, start, stop, step):
    """First feasible node from ``start`` toward ``stop`` at offsets 0, 1, 2, 4, ..."""
    span = abs(stop - start)
    off = 0
    while off <= span:
        t = start + step * off
        if math.isfinite(fn(t)[0]):
            return t
        off = 1 if off == 0 else 2 * off
    return start


def _bisect_nodes(fn, lo, hi, name="x_S"):
    """Integer bisection for a sign change of ``fn`` over nodes ``[lo, hi]``.

    Infeasible nodes (``nan``) are skipped by nudging the probe toward
    feasible nodes; endpoints move inward until they are feasible.
    """
    lo, hi = _feasible_end(fn, lo, hi, 1), _feasible_end(fn, hi, lo, -1)
    r_lo, r_hi = fn(lo)[0], fn(hi)[0]
    if not (math.isfinite(r_lo) and math.isfinite(r_hi)):
        raise NoSolutionInBracketError("no feasible candidate at the bracket ends",
                                       unknown=name, bracket=[lo, hi])
    if r_lo == 0.0:
        return lo
    if r_hi == 0.0:
        return hi
    if np.sign(r_lo) == np.sign(r_hi):
        raise NoSolutionInBracketError("residual does not change sign over the bracket",
                                       unknown=name, bracket=[lo, hi], residuals=[r_lo, r_hi])
    while hi - lo > 1:
        mid = _feasible_near(fn, (lo + hi) // 2, lo, hi)
        if mid is None:
            raise NoSolutionInBracketError("no feasible candidate inside the bracket",
                                           unknown=name, bracket=[lo, hi])
        r = fn(mid)[0]
        if r == 0.0:
            return mid
        if np.sign(r) == np.sign(r_lo):
            lo, r_lo = mid, r
        else:
            hi, r_hi = mid, r
    return lo if abs(r_lo) <= abs(r_hi) else hi


def _shock_bracket(grid, branch, bracket):
    if bracket is None:
        lo, hi = 0, grid.N - 1
    else:
        lo = grid.index_of(bracket[0])
        hi = grid.index_of(bracket[1])
        if hi < lo:
            lo, hi = hi, lo
    if branch.turning_points:
        x_last = max(tp.x_T for tp in branch.turning_points)
        lo = max(lo, int(math.floor((x_last - grid.x_L) / grid.h)) + 1)
    last = branch.last
    hi = min(hi, last if last is not None else -1)
    return lo, hi


def solve_shock_location(model, alphas, grid, bracket=None, k=None, branch=None,
                         cond_index=None):
    """Place a single shock by integer bisection on the right-boundary residual.

    Parameters
    ----------
    bracket : (float, float), optional
        Interval of candidate shock positions; defaults to the whole domain.
    k : int, optional
        Shock field (0-based).  Defaults to the smallest positive eigenvalue.

    Raises
    ------
    NoSolutionInBracketError
        If the residual has no sign change over the bracket.
    """
    if branch is None:
        branch = left_branch(model, grid, alphas)
    if cond_index is None:
        cond_index = model.boundary.n_right - 1
    lo, hi = _shock_bracket(grid, branch, bracket)
    if hi < lo:
        raise NoSolutionInBracketError("left branch does not reach the bracket",
                                       bracket=list(bracket or (grid.x_L, grid.x_R)))
    fn = _NodeResidual(model, grid, tuple(alphas), branch, k, cond_index)
    s = _bisect_nodes(fn, lo, hi)
    sol = fn(s)[1]
    sol.diagnostics["shock_evaluations"] = len(fn.cache)
    sol.params.brackets["x_S"] = (grid.x(lo), grid.x(hi))
    sol.params.bindings = [("x_S", "bc", cond_index, "post")]
    cond = model.boundary.right[cond_index]
    sol.diagnostics["bc_tol"] = bc_tol(grid, cond)
    return sol


def solve_multi(model, grid, subdivision=None, k=None, alphas=()):
    """Search every sub-interval between consecutive subdivision points for a shock.

    Sub-intervals default to the a priori zeros of the source coefficient.
    Returns the distinct admissible solutions found, possibly none.
    """
    if subdivision is None:
        subdivision = model.source_zeros()
    pts = sorted(set([grid.x_L, grid.x_R] + [float(p) for p in (subdivision if subdivision is not None else [])]))
    pts = [p for p in pts if grid.x_L <= p <= grid.x_R]
    branch = left_branch(model, grid, alphas)
    out = []
    for a, b in zip(pts[:-1], pts[1:]):
        try:
            sol = solve_shock_location(model, alphas, grid, (a, b), k, branch)
        except InfeasibleError as exc:
            logger.debug("no shock in [%g, %g]: %s", a, b, exc)
            continue
        cond = model.boundary.right[-1]
        if abs(sol.bc_residual[-1]) > bc_tol(grid, cond):
            continue
        if all(abs(sol.shock_node - o.shock_node) > 1 for o in out):
            out.append(sol)
    return out


def _alpha_bracket(model, brackets, name, idx):
    if brackets and name in brackets:
        lo, hi = brackets[name]
    else:
        seed = model.boundary.alpha_seed[idx]
        lo, hi = seed * (1.0 - ALPHA_BRACKET), seed * (1.0 + ALPHA_BRACKET)
        if hi < lo:
            lo, hi = hi, lo
    return float(lo), float(hi)


def _bisect_continuous(fn, lo, hi, name, rtol=ALPHA_RTOL, max_iter=200):
    """Bisection tolerant of jumps in ``fn``; returns the final bracket."""
    f_lo, f_hi = fn(lo), fn(hi)
    if not (math.isfinite(f_lo) and math.isfinite(f_hi)) or np.sign(f_lo) == np.sign(f_hi):
        raise StructureInfeasibleError(f"no sign change for {name} over its bracket",
                                       unknown=name, bracket=[lo, hi], residuals=[f_lo, f_hi])
    for _ in range(max_iter):
        if hi - lo <= rtol * max(1.0, abs(lo), abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        f_mid = fn(mid)
        if not math.isfinite(f_mid):
            raise StructureInfeasibleError(f"infeasible candidate while solving for {name}",
                                           unknown=name, value=mid)
        if f_mid == 0.0:
            return mid, mid
        if np.sign(f_mid) == np.sign(f_lo):
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return lo, hi


def _pre_compat_residual(model, grid, alphas, field_index):
    br = left_branch(model, grid, alphas, cross_sonic=False)
    x_e, U_e = br.end_point()
    return compat_residual(model, U_e, x_e, field_index)


def solve_nested(model, grid, k=1, brackets=None):
    """Resolve all unknowns following the matching table.

    Parameters
    ----------
    k : int
        Shock field, 1-based.
    brackets : dict, optional
        ``{"alpha_i": (lo, hi), "x_S": (x0, x1)}``; alpha brackets default to
        +-50% around the model's seed.

    Raises
    ------
    StructureInfeasibleError
        Some unknown has no sign change of its matching function.
    """
    I = model.boundary.n_alpha
    J = model.boundary.n_right
    rows = matching_table(I, J, k)
    k0 = k - 1
    pre = [r for r in rows if r[3] == "pre"]
    outer = [r for r in rows if r[3] == "post" and r[0] != "x_S"]
    xs_row = next(r for r in rows if r[0] == "x_S")
    used = {}

    def alpha_index(name):
        return int(name.split("_")[1]) - 1

    def solve_inner(fixed):
        # turning-point unknowns, innermost first (leftmost turning point)
        alphas = list(fixed)
        pre_order = sorted(pre, key=lambda r: r[2])

        def rec(level, alphas):
            if level == len(pre_order):
                return alphas
            name, _, field_i, _ = pre_order[level]
            ai = alpha_index(name)
            lo, hi = _alpha_bracket(model, brackets, name, ai)
            used[name] = (lo, hi)

            def fn(val):
                a = list(alphas)
                a[ai] = val
                a = rec(level + 1, a)
                try:
                    return _pre_compat_residual(model, grid, a, field_i)
                except SweepError:
                    return math.nan

            lo, hi = _bisect_continuous(fn, lo, hi, name)
            # pick the bracket end whose branch crosses the sonic point and completes
            best = None
            for val in (0.5 * (lo + hi), lo, hi):
                a = list(alphas)
                a[ai] = val
                a = rec(level + 1, a)
                br = left_branch(model, grid, a)
                crossed = any(tp.field_index == field_i for tp in br.turning_points)
                if crossed and br.complete:
                    return a
                if best is None and crossed:
                    best = a
            if best is None:
                raise StructureInfeasibleError(f"{name}: branch does not cross the sonic point",
                                               unknown=name, bracket=[lo, hi])
            return best

        return rec(0, alphas)

    def solve_xs(alphas):
        br = left_branch(model, grid, alphas)
        xb = None if brackets is None else brackets.get("x_S")
        try:
            if xs_row[1] == "bc":
                sol = solve_shock_location(model, alphas, grid, xb, k0, br, xs_row[2])
            else:
                lo, hi = _shock_bracket(grid, br, xb)
                fn = _NodeResidual(model, grid, tuple(alphas), br, k0, xs_row[2], "compat")
                s = _bisect_nodes(fn, lo, hi)
                sol = fn(s)[1]
        except NoSolutionInBracketError as exc:
            raise StructureInfeasibleError("no admissible shock location",
                                           **{**exc.details, "unknown": "x_S"}) from None
        return sol

    seed = [float(s) for s in model.boundary.alpha_seed] if I else []

    def solve_outer(level, alphas):
        if level == len(outer):
            a = solve_inner(alphas)
            return solve_xs(a)
        name, kind, idx, _ = outer[level]
        ai = alpha_index(name)
        lo, hi = _alpha_bracket(model, brackets, name, ai)
        used[name] = (lo, hi)

        def fn(val):
            a = list(alphas)
            a[ai] = val
            try:
                sol = solve_outer(level + 1, a)
            except SweepError:
                return math.nan
            if kind == "bc":
                return float(sol.bc_residual[idx])
            x_e, U_e = sol.post.end_point()
            return compat_residual(model, U_e, x_e, idx)

        lo, hi = _bisect_continuous(fn, lo, hi, name)
        a = list(alphas)
        a[ai] = 0.5 * (lo + hi)
        return solve_outer(level + 1, a)

    sol = solve_outer(0, seed)
    sol.params.bindings = rows
    sol.params.brackets.update(used)
    return sol


def solve_1d(model, grid, k=None, brackets=None):
    """Solve a built-in 1D problem with the strategy its boundary data calls for.

    Models with unknown left data go through ``solve_nested``; models with
    a priori sub-intervals (several source sign regions) through
    ``solve_multi``; all others through ``solve_shock_location``.  Always
    returns a list of solutions.
    """
    if model.boundary.n_alpha:
        return [solve_nested(model, grid, k=1 if k is None else k + 1, brackets=brackets)]
    zeros = model.source_zeros()
    inner = [] if zeros is None else [z for z in zeros if grid.x_L < z < grid.x_R]
    if len(inner) > 1:
        sols = solve_multi(model, grid, k=k)
        if not sols:
            raise NoSolutionInBracketError("no admissible shock in any sub-interval")
        return sols
    bracket = None if not brackets else brackets.get("x_S")
    return [solve_shock_location(model, (), grid, bracket=bracket, k=k)]
