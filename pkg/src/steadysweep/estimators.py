"""Estimator-style wrappers with ``fit``/``predict`` and ``get_params``.

``fit`` ignores its data arguments; the problem definition lives in the
constructor parameters.  ``predict`` evaluates the fitted steady field at
query points.
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .match2d import solve_2d
from .reference import evolve_lf_1d
from .shock1d import solve_1d
from .sweep1d import Grid1D
from .sweep2d import Grid2D
from .systems import get_model
from .validation import check_grid_size, check_points


class SteadySweep1D(BaseEstimator):
    """Sweeping solver for a built-in 1D problem.

    Parameters
    ----------
    problem : str
        Registry identifier, e.g. ``"isentropic_duct"``.
    N : int
        Number of grid nodes.
    k : int, optional
        Shock field (0-based); defaults to the smallest positive eigenvalue.
    overrides : dict, optional
        Model parameter overrides.
    brackets : dict, optional
        Brackets for unknowns, forwarded to the solver.
    solution_index : int
        Which solution ``predict`` uses when several are found.

    Attributes
    ----------
    model_ : model instance
    solutions_ : list of SteadySolution1D
    """

    def __init__(self, problem="isentropic_duct", N=1024, k=None, overrides=None,
                 brackets=None, solution_index=0):
        self.problem = problem
        self.N = N
        self.k = k
        self.overrides = overrides
        self.brackets = brackets
        self.solution_index = solution_index

    def fit(self, X=None, y=None):
        self.model_ = get_model(self.problem, **(self.overrides or {}))
        self.grid_ = Grid1D.for_model(self.model_, check_grid_size(self.N))
        self.solutions_ = solve_1d(self.model_, self.grid_, k=self.k, brackets=self.brackets)
        self.solution_ = self.solutions_[self.solution_index]
        return self

    @property
    def x_S_(self):
        check_is_fitted(self, "solution_")
        return self.solution_.x_S

    def predict(self, X):
        """Nearest-node values at positions ``X``, shape ``(k, n)``."""
        check_is_fitted(self, "solution_")
        x = check_points(X, 1)[:, 0]
        j = np.clip(np.rint((x - self.grid_.x_L) / self.grid_.h).astype(int), 0, self.grid_.N - 1)
        return self.solution_.states[j]

    def score(self, X, y):
        """Negative mean absolute error against reference values ``y``."""
        P = self.predict(X)
        return -float(np.mean(np.abs(P - np.asarray(y, dtype=float).reshape(P.shape))))


class LaxFriedrichs1D(BaseEstimator):
    """Time-evolution reference for a built-in 1D problem."""

    def __init__(self, problem="isentropic_duct", N=256, cfl=0.45, local=False, overrides=None):
        self.problem = problem
        self.N = N
        self.cfl = cfl
        self.local = local
        self.overrides = overrides

    def fit(self, X=None, y=None):
        self.model_ = get_model(self.problem, **(self.overrides or {}))
        self.grid_ = Grid1D.for_model(self.model_, check_grid_size(self.N))
        self.run_ = evolve_lf_1d(self.model_, self.grid_, cfl=self.cfl, local=self.local)
        return self

    def predict(self, X):
        check_is_fitted(self, "run_")
        x = check_points(X, 1)[:, 0]
        j = np.clip(np.rint((x - self.grid_.x_L) / self.grid_.h).astype(int), 0, self.grid_.N - 1)
        return self.run_.states[j]


class SteadySweep2D(BaseEstimator):
    """Paraxial sweeping plus curve matching for a built-in 2D problem.

    Parameters
    ----------
    problem : str
    m : int
        Nodes per side along ``x``.
    my : int, optional
        Nodes along ``y``; defaults to ``m`` scaled by the aspect ratio.
    method : {"linear", "nearest"}
        Interpolation used by ``predict``.
    """

    def __init__(self, problem="burgers2d", m=128, my=None, overrides=None, method="nearest"):
        self.problem = problem
        self.m = m
        self.my = my
        self.overrides = overrides
        self.method = method

    def fit(self, X=None, y=None):
        self.model_ = get_model(self.problem, **(self.overrides or {}))
        self.grid_ = grid_2d(self.model_, self.m, self.my)
        self.solution_ = solve_2d(self.model_, self.grid_)
        g = self.grid_
        self._interp = RegularGridInterpolator((g.y, g.x), self.solution_.values, method=self.method,
                                               bounds_error=False, fill_value=None)
        return self

    @property
    def curves_(self):
        check_is_fitted(self, "solution_")
        return self.solution_.curves

    def predict(self, X):
        """Field values at points ``X`` of shape ``(k, 2)``; returns ``(k, n)``."""
        check_is_fitted(self, "solution_")
        P = check_points(X, 2)
        return self._interp(P[:, ::-1])


def grid_2d(model, m, my=None):
    """Grid with ``m`` nodes along ``x`` and, unless given, a ``y`` count
    matching the aspect ratio so that ``hx == hy``."""
    m = check_grid_size(m, "m")
    if my is None:
        ratio = (model.ylim[1] - model.ylim[0]) / (model.xlim[1] - model.xlim[0])
        my = int(round((m - 1) * ratio)) + 1
    return Grid2D.for_model(model, m, check_grid_size(my, "my"))
