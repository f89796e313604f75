"""Input validation helpers shared by the estimators and the command line."""

from __future__ import annotations

import math

import numpy as np
from sklearn.utils import check_array, check_random_state

from .errors import ConfigError, DomainError

SIDES = ("left", "right", "bottom", "top")
MIN_GRID = 8


def check_grid_size(n, name="N", minimum=MIN_GRID):
    """Return ``n`` as an int, rejecting non-integers and sizes below ``minimum``."""
    try:
        v = int(n)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer", **{name: n}) from None
    if v != n or v < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}", **{name: n})
    return v


def check_sizes(sizes, minimum_count=4, rtol=0.05):
    """Grid sizes for a scaling study: at least ``minimum_count`` entries in
    geometric progression (constant ratio within ``rtol``)."""
    sizes = [check_grid_size(s, "size") for s in sizes]
    if len(sizes) < minimum_count:
        raise ConfigError(f"a scaling study needs at least {minimum_count} sizes", sizes=sizes)
    ratios = np.array(sizes[1:], dtype=float) / np.array(sizes[:-1], dtype=float)
    if np.any(ratios <= 1.0) or np.ptp(ratios) > rtol * ratios.mean():
        raise ConfigError("sizes must form an increasing geometric progression", sizes=sizes)
    return sizes


def check_side(side):
    if side not in SIDES:
        raise ConfigError(f"unknown side {side!r}", known=list(SIDES))
    return side


def check_bracket(bracket, name="bracket"):
    """Finite increasing pair ``(lo, hi)``."""
    try:
        lo, hi = (float(v) for v in bracket)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a pair of numbers", **{name: bracket}) from None
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise ConfigError(f"{name} must be finite and increasing", **{name: [lo, hi]})
    return lo, hi


def check_state(model, U):
    """Finite state of the right length, admissible for ``model``."""
    U = np.asarray(U, dtype=float).reshape(-1)
    if U.size != model.n:
        raise DomainError("state has the wrong length", expected=model.n, got=int(U.size))
    if not np.all(np.isfinite(U)):
        raise DomainError("state is not finite", state=U)
    check = getattr(model, "check_state", None)
    if check is not None:
        check(U)
    return U


def check_points(X, dim):
    """Query points as a finite ``(k, dim)`` array; 1D input accepted for ``dim == 1``."""
    X = np.asarray(X, dtype=float)
    if dim == 1 and X.ndim == 1:
        X = X[:, None]
    X = check_array(X, ensure_2d=True, dtype=float)
    if X.shape[1] != dim:
        raise ConfigError(f"expected points with {dim} coordinate(s)", got=int(X.shape[1]))
    return X


def check_seed(seed):
    """``numpy.random.RandomState`` from ``None``, an int or an existing state."""
    return check_random_state(seed)
