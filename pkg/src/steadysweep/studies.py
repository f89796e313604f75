"""Solver dispatch, reference comparisons, scaling and convergence studies."""

from __future__ import annotations

import math
import time

import numpy as np
from scipy.ndimage import binary_dilation

from .errors import ConfigError
from .estimators import grid_2d
from .match2d import solve_2d
from .reference import (duct_exact_solution, duct_shock_oracle, evolve_lf_1d, evolve_lf_2d)
from .shock1d import solve_1d
from .sweep1d import Grid1D
from .validation import check_grid_size, check_sizes

SHOCK_EXCLUSION = 5


def dimension(model):
    return 2 if hasattr(model, "xlim") else 1


def make_grid(model, size):
    """``Grid1D`` from a node count, or ``Grid2D`` from ``m`` or ``(mx, my)``."""
    if dimension(model) == 1:
        if isinstance(size, (list, tuple)):
            raise ConfigError("1D problems take a single grid size", grid=list(size))
        return Grid1D.for_model(model, check_grid_size(size))
    if isinstance(size, (list, tuple)):
        if len(size) != 2:
            raise ConfigError("2D grid must be m or [mx, my]", grid=list(size))
        return grid_2d(model, size[0], size[1])
    return grid_2d(model, size)


def run_sweep(model, grid, brackets=None, k=None):
    """Solve with the sweeping method; returns ``(solutions, timings)``.

    ``solutions`` is a list of ``SteadySolution1D`` in 1D and a single
    ``MergedSolution2D`` in 2D.
    """
    t0 = time.perf_counter()
    if dimension(model) == 1:
        sols = solve_1d(model, grid, k=k, brackets=brackets)
        return sols, {"solve": time.perf_counter() - t0}
    sol = solve_2d(model, grid)
    timings = dict(sol.diagnostics.get("timings", {}))
    timings["solve"] = time.perf_counter() - t0
    return [sol], timings


def run_evolve(model, grid, local=False):
    if dimension(model) == 1:
        return evolve_lf_1d(model, grid, local=local)
    return evolve_lf_2d(model, grid)


# ---------------------------------------------------------------------------
# Exact solutions
# ---------------------------------------------------------------------------

def exact_solution(model, grid):
    """Exact field and shock position(s) on ``grid``.

    Returns ``(values, shocks)``: values of shape ``(N, n)`` in 1D or
    ``(my, mx, 1)`` in 2D, and a list of exact shock positions (1D only).

    Raises
    ------
    ConfigError
        If no analytic or oracle solution is registered for the model.
    """
    name = model.name
    if dimension(model) == 2:
        if model.exact is None:
            raise ConfigError(f"no exact solution registered for {name!r}")
        X, Y = grid.mesh()
        return model.exact(X, Y)[..., None], []
    x = grid.nodes
    if getattr(model, "exact", None) is not None:
        return np.asarray(model.exact(x), dtype=float).reshape(x.size, -1), [model.exact_shock]
    if name == "isentropic_duct":
        roots = duct_shock_oracle(model)
        return duct_exact_solution(model, x, roots[0]), roots[:1]
    raise ConfigError(f"no exact solution registered for {name!r}")


def _curve_distance(sol, grid):
    X, Y = grid.mesh()
    P = np.column_stack([X.ravel(), Y.ravel()])
    if not sol.curves:
        return np.full(X.shape, np.inf)
    return np.min([c.distance_to(P) for c in sol.curves], axis=0).reshape(X.shape)


def _jump_mask(U, frac=0.03):
    """Nodes touching a one-cell jump of the first component above ``frac``
    of its range."""
    q = U[..., 0]
    tol = frac * max(1e-12, float(np.nanmax(q) - np.nanmin(q)))
    near = np.zeros(q.shape, dtype=bool)
    dx = np.abs(np.diff(q, axis=1)) > tol
    dy = np.abs(np.diff(q, axis=0)) > tol
    near[:, 1:] |= dx
    near[:, :-1] |= dx
    near[1:] |= dy
    near[:-1] |= dy
    return near


def relative_l1(A, B, keep):
    """Per-component ``sum |A - B| / sum |B|`` over nodes where ``keep``."""
    A = np.asarray(A, dtype=float)[keep]
    B = np.asarray(B, dtype=float)[keep]
    den = np.maximum(np.sum(np.abs(B), axis=0), 1e-300)
    return np.sum(np.abs(A - B), axis=0) / den


def compare_with_reference(model, grid, solution=None, local=True, exclusion=SHOCK_EXCLUSION):
    """Relative L1 difference between the sweep and a Lax-Friedrichs steady state.

    Nodes within ``exclusion`` cells of a shock are left out: around the
    sweep shock node in 1D, around matched curves or detected jumps in 2D.
    Returns a dict with the per-component differences, their maximum and
    that maximum divided by the grid spacing.
    """
    if solution is None:
        solution = run_sweep(model, grid)[0][0]
    t0 = time.perf_counter()
    run = run_evolve(model, grid, local=local)
    t_ref = time.perf_counter() - t0
    if dimension(model) == 1:
        h = grid.h
        keep = np.ones(grid.N, dtype=bool)
        if solution.shock_node is not None:
            s = solution.shock_node
            keep[max(0, s - exclusion):s + exclusion + 1] = False
        S = solution.states
    else:
        h = max(grid.hx, grid.hy)
        S = solution.values
        if solution.curves:
            keep = _curve_distance(solution, grid) > exclusion * h
        else:
            keep = ~binary_dilation(_jump_mask(S), iterations=max(1, exclusion - 2))
        keep &= np.all(np.isfinite(S), axis=-1)
    rel = relative_l1(S, run.states, keep)
    return {"relative_l1": rel.tolist(), "max_relative_l1": float(np.max(rel)),
            "in_units_of_h": float(np.max(rel) / h), "h": h,
            "kept_fraction": float(np.mean(keep)), "reference": run.summary(),
            "reference_time": t_ref, "local_lf": bool(local)}, run


# ---------------------------------------------------------------------------
# Studies
# ---------------------------------------------------------------------------

def loglog_slope(N, t):
    return float(np.polyfit(np.log(np.asarray(N, float)), np.log(np.asarray(t, float)), 1)[0])


def study_scaling(model, sizes, repeats=3, warmup=True):
    """Wall time of the sweeping solve over a geometric sequence of sizes.

    Each size is timed ``repeats`` times and the minimum kept.  ``N`` is the
    total node count.  Returns ``{"rows": [(N, size, seconds)], "slope": s}``.
    """
    sizes = check_sizes(sizes)
    if warmup:
        run_sweep(model, make_grid(model, sizes[0]))
    rows = []
    for s in sizes:
        grid = make_grid(model, s)
        best = math.inf
        for _ in range(max(1, int(repeats))):
            t0 = time.perf_counter()
            run_sweep(model, grid)
            best = min(best, time.perf_counter() - t0)
        N = grid.N if dimension(model) == 1 else grid.mx * grid.my
        rows.append((int(N), s, best))
    return {"rows": rows, "slope": loglog_slope([r[0] for r in rows], [r[2] for r in rows])}


def study_convergence(model, sizes):
    """Error against the registered exact solution under refinement.

    Returns rows ``(size, h, L1 error, shock-location error, observed order)``
    with the order computed from consecutive L1 errors.
    """
    sizes = [check_grid_size(s, "size") for s in sizes]
    if len(sizes) < 2:
        raise ConfigError("a convergence study needs at least two sizes", sizes=sizes)
    exact_solution(model, make_grid(model, sizes[0]))
    rows = []
    for s in sizes:
        grid = make_grid(model, s)
        sols, _ = run_sweep(model, grid)
        sol = sols[0]
        exact, shocks = exact_solution(model, grid)
        if dimension(model) == 1:
            h = grid.h
            err = float(np.mean(np.abs(sol.states - exact)))
            shock_err = abs(sol.x_S - shocks[0]) if (shocks and sol.x_S is not None) else math.nan
        else:
            h = max(grid.hx, grid.hy)
            err = float(np.mean(np.abs(sol.values - exact)))
            shock_err = math.nan
        rows.append([s, h, err, shock_err, math.nan])
    for a, b in zip(rows[:-1], rows[1:]):
        if a[2] > 0 and b[2] > 0:
            b[4] = math.log(a[2] / b[2]) / math.log(a[1] / b[1])
    return {"rows": [tuple(r) for r in rows]}
