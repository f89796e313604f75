"""Paraxial sweeps: 2D solution branches marched from one side of a rectangle.

Treating the marching axis ``s`` as time, the steady law becomes
``G(u)_s + F(u)_r = a`` with ``G`` the flux along ``s`` (sign-flipped when
the sweep runs against the coordinate) and ``F`` the transverse flux.
Each row is advanced by forward Euler in ``v = G(u)`` with the exact
Godunov flux in ``r`` for scalar laws, and Rusanov for systems.  Sub-steps
keep the paraxial CFL number at 0.5; only grid rows are stored.

A node is masked when the marching characteristic speed ``G'(u)`` falls
below ``1e-3`` of the local characteristic scale, or when inversion fails.
Masks persist downstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .errors import ConfigError, DomainError

CFL = 0.5
PARAXIAL_GUARD = 1e-3

VALID, MASK_DEGENERATE, MASK_INVERSION, MASK_UPSTREAM = 0, 1, 2, 3
MASK_REASONS = {VALID: "valid", MASK_DEGENERATE: "paraxial degeneracy",
                MASK_INVERSION: "flux inversion failed", MASK_UPSTREAM: "masked upstream"}


@dataclass(frozen=True)
class Grid2D:
    """Uniform ``mx x my`` node grid on ``xlim x ylim``."""

    xlim: tuple
    ylim: tuple
    mx: int
    my: int

    def __post_init__(self):
        if int(self.mx) != self.mx or int(self.my) != self.my or self.mx < 2 or self.my < 2:
            raise ConfigError("grid requires mx, my >= 2", mx=self.mx, my=self.my)
        if not (self.xlim[0] < self.xlim[1] and self.ylim[0] < self.ylim[1]):
            raise ConfigError("grid limits must be increasing", xlim=self.xlim, ylim=self.ylim)

    @classmethod
    def for_model(cls, model, mx, my=None):
        return cls(tuple(model.xlim), tuple(model.ylim), int(mx), int(mx if my is None else my))

    @property
    def hx(self):
        return (self.xlim[1] - self.xlim[0]) / (self.mx - 1)

    @property
    def hy(self):
        return (self.ylim[1] - self.ylim[0]) / (self.my - 1)

    @property
    def x(self):
        return self.xlim[0] + self.hx * np.arange(self.mx)

    @property
    def y(self):
        return self.ylim[0] + self.hy * np.arange(self.my)

    @property
    def N(self):
        return self.mx * self.my

    def mesh(self):
        """``(X, Y)`` arrays of shape ``(my, mx)``."""
        return np.meshgrid(self.x, self.y)


@dataclass
class Field2D:
    """Branch values on a grid, indexed ``[j, i]`` for ``(y_j, x_i)``.

    ``values`` has shape ``(my, mx, n)``.  ``reason`` holds a mask code per
    node (see ``MASK_REASONS``).  ``origin`` is the side the sweep started
    from, or ``"merged"``.
    """

    grid: Grid2D
    values: np.ndarray
    valid: np.ndarray
    reason: np.ndarray
    origin: str
    substeps: int = 0

    @property
    def u(self):
        """Scalar view ``values[..., 0]``."""
        return self.values[..., 0]

    def coverage(self):
        return float(np.mean(self.valid))

    def summary(self):
        codes, counts = np.unique(self.reason, return_counts=True)
        return {"origin": self.origin, "coverage": self.coverage(), "substeps": int(self.substeps),
                "mask": {MASK_REASONS[int(c)]: int(n) for c, n in zip(codes, counts)}}


# ---------------------------------------------------------------------------
# Godunov flux
# ---------------------------------------------------------------------------

def godunov_flux(flux, u_left, u_right, critical_points=None):
    """Exact Godunov flux of a scalar flux.

    ``min f`` over ``[u_left, u_right]`` when ``u_left <= u_right``, otherwise
    ``max f`` over ``[u_right, u_left]``.  Extremes are taken over the two
    endpoints and the critical points lying in the interval, which is exact
    for any flux whose critical points are supplied.  ``flux`` may be a
    ``PolyFlux`` (critical points read from it) or any vectorised callable.
    """
    if critical_points is None:
        critical_points = getattr(flux, "critical_points", ())
    ul = np.asarray(u_left, dtype=float)
    ur = np.asarray(u_right, dtype=float)
    fl, fr = flux(ul), flux(ur)
    lo = np.minimum(ul, ur)
    hi = np.maximum(ul, ur)
    fmin = np.minimum(fl, fr)
    fmax = np.maximum(fl, fr)
    for c in critical_points:
        inside = (lo < c) & (c < hi)
        fc = flux(c)
        fmin = np.where(inside, np.minimum(fmin, fc), fmin)
        fmax = np.where(inside, np.maximum(fmax, fc), fmax)
    out = np.where(ul <= ur, fmin, fmax)
    return float(out) if out.ndim == 0 else out


@njit(cache=True)
def _poly(c, u):
    return ((c[3] * u + c[2]) * u + c[1]) * u + c[0]


@njit(cache=True)
def _dpoly(c, u):
    return (3.0 * c[3] * u + 2.0 * c[2]) * u + c[1]


@njit(cache=True)
def _godunov(c, crit, ul, ur):
    fl = _poly(c, ul)
    fr = _poly(c, ur)
    if ul <= ur:
        out = min(fl, fr)
        for k in range(crit.size):
            if ul < crit[k] < ur:
                out = min(out, _poly(c, crit[k]))
    else:
        out = max(fl, fr)
        for k in range(crit.size):
            if ur < crit[k] < ul:
                out = max(out, _poly(c, crit[k]))
    return out


@njit(cache=True)
def _guard(Gc, Fc, u, rel):
    return rel * (abs(_dpoly(Fc, u)) + abs(_dpoly(Gc, u)))


@njit
def _sweep_scalar_kernel(u0, s_pos, r_pos, hs, hr, march_is_x, Gc, Fc, Fcrit,
                         bc_lo, bc_hi, has_lo, has_hi, src, src_params, cfl, rel):
    ms = s_pos.size
    mr = r_pos.size
    U = np.full((ms, mr), np.nan)
    reason = np.zeros((ms, mr), dtype=np.int8)
    u = u0.copy()
    ok = np.ones(mr, dtype=np.bool_)
    for i in range(mr):
        if not (_dpoly(Gc, u[i]) > _guard(Gc, Fc, u[i], rel)):
            ok[i] = False
            reason[0, i] = 1
    for i in range(mr):
        if ok[i]:
            U[0, i] = u[i]
    Fh = np.empty(mr + 1)
    v = np.empty(mr)
    total_sub = 0
    for k in range(ms - 1):
        remaining = hs
        done = 0.0
        while remaining > 1e-13 * hs:
            smax = 0.0
            for i in range(mr):
                if ok[i]:
                    sg = abs(_dpoly(Fc, u[i]) / _dpoly(Gc, u[i]))
                    if sg > smax:
                        smax = sg
            ds = remaining
            if smax * ds > cfl * hr:
                ds = cfl * hr / smax
                if remaining - ds < 1e-9 * hs:
                    ds = remaining
            f0 = done / hs
            f1 = (done + ds) / hs
            # transverse boundary data, kept only when it is inflow data
            lo_use = False
            hi_use = False
            ub_lo = 0.0
            ub_hi = 0.0
            if has_lo:
                ub_lo = bc_lo[k] + f0 * (bc_lo[k + 1] - bc_lo[k])
                dG = _dpoly(Gc, ub_lo)
                lo_use = dG > _guard(Gc, Fc, ub_lo, rel) and _dpoly(Fc, ub_lo) > 0.0
            if has_hi:
                ub_hi = bc_hi[k] + f0 * (bc_hi[k + 1] - bc_hi[k])
                dG = _dpoly(Gc, ub_hi)
                hi_use = dG > _guard(Gc, Fc, ub_hi, rel) and _dpoly(Fc, ub_hi) < 0.0
            # interface fluxes; masked neighbours act as zero-gradient ghosts
            for i in range(mr + 1):
                if i == 0:
                    ur = u[0]
                    ul = ub_lo if lo_use else ur
                elif i == mr:
                    ul = u[mr - 1]
                    ur = ub_hi if hi_use else ul
                else:
                    ul = u[i - 1] if ok[i - 1] else u[i]
                    ur = u[i] if ok[i] else u[i - 1]
                Fh[i] = _godunov(Fc, Fcrit, ul, ur)
            s_here = s_pos[k] + (s_pos[k + 1] - s_pos[k]) * f0
            lam = ds / hr
            for i in range(mr):
                if not ok[i]:
                    continue
                if march_is_x:
                    a = src(u[i], s_here, r_pos[i], src_params)
                else:
                    a = src(u[i], r_pos[i], s_here, src_params)
                v[i] = _poly(Gc, u[i]) - lam * (Fh[i + 1] - Fh[i]) + ds * a
            for i in range(mr):
                if not ok[i]:
                    continue
                w = u[i]
                tol = 1e-12 * max(1.0, abs(v[i]))
                conv = False
                for it in range(50):
                    r = _poly(Gc, w) - v[i]
                    if abs(r) <= tol:
                        conv = True
                        break
                    dG = _dpoly(Gc, w)
                    if not (dG > _guard(Gc, Fc, w, rel)):
                        break
                    w = w - r / dG
                if conv and _dpoly(Gc, w) > _guard(Gc, Fc, w, rel):
                    u[i] = w
                elif conv:
                    ok[i] = False
                    reason[k + 1, i] = 1
                else:
                    ok[i] = False
                    reason[k + 1, i] = 2
            if has_lo:
                ub = bc_lo[k] + f1 * (bc_lo[k + 1] - bc_lo[k])
                if _dpoly(Gc, ub) > _guard(Gc, Fc, ub, rel) and _dpoly(Fc, ub) > 0.0:
                    u[0] = ub
            if has_hi:
                ub = bc_hi[k] + f1 * (bc_hi[k + 1] - bc_hi[k])
                if _dpoly(Gc, ub) > _guard(Gc, Fc, ub, rel) and _dpoly(Fc, ub) < 0.0:
                    u[mr - 1] = ub
            remaining -= ds
            done += ds
            total_sub += 1
        for i in range(mr):
            if ok[i]:
                U[k + 1, i] = u[i]
            elif reason[k + 1, i] == 0:
                reason[k + 1, i] = 3
    return U, reason, total_sub


_ORIENT = {
    # side: (march axis, reversed, transverse low side, transverse high side)
    "bottom": ("y", False, "left", "right"),
    "top": ("y", True, "left", "right"),
    "left": ("x", False, "bottom", "top"),
    "right": ("x", True, "bottom", "top"),
}


def _to_physical(A, side):
    if side == "bottom":
        return A
    if side == "top":
        return A[::-1, :]
    if side == "left":
        return A.T
    return A[::-1, :].T


def sweep_scalar(model, side, grid, init=None, cfl=CFL, guard=PARAXIAL_GUARD):
    """Sweep a scalar 2D law from ``side`` across the grid.

    Parameters
    ----------
    model : ScalarLaw2D
    side : {"left", "right", "bottom", "top"}
    grid : Grid2D
    init : array_like, optional
        Values on the origin side, ordered along increasing transverse
        coordinate.  Defaults to the model's boundary data.

    Returns
    -------
    Field2D
    """
    if side not in _ORIENT:
        raise ConfigError(f"unknown side {side!r}")
    axis, rev, lo_side, hi_side = _ORIENT[side]
    if axis == "y":
        s_pos, r_pos, hs, hr = grid.y, grid.x, grid.hy, grid.hx
        Graw, Fraw = model.flux_y, model.flux_x
    else:
        s_pos, r_pos, hs, hr = grid.x, grid.y, grid.hx, grid.hy
        Graw, Fraw = model.flux_x, model.flux_y
    if rev:
        s_pos = s_pos[::-1].copy()
    sign = -1.0 if rev else 1.0
    Gc = sign * np.array(Graw.coef)
    Fc = np.array(Fraw.coef)
    Fcrit = np.array(Fraw.critical_points, dtype=float)
    if init is None:
        u0 = model.boundary_values(side, r_pos)
        if u0 is None:
            raise ConfigError(f"no boundary data on the {side} side", side=side)
    else:
        u0 = np.asarray(init, dtype=float).reshape(-1)
        if u0.size != r_pos.size:
            raise ConfigError("initial row has the wrong length", expected=r_pos.size)
    if not np.all(np.isfinite(u0)):
        raise DomainError("non-finite boundary data", side=side)
    lo = model.boundary_values(lo_side, s_pos)
    hi = model.boundary_values(hi_side, s_pos)
    zero = np.zeros(s_pos.size)
    src = model.source_jit
    src_params = np.array(model.source_params, dtype=float)
    if src is None:
        from .systems import zero_source as src
    U, reason, nsub = _sweep_scalar_kernel(
        u0.astype(float), np.ascontiguousarray(s_pos, dtype=float), np.asarray(r_pos, float),
        float(hs), float(hr), axis == "x", Gc, Fc, Fcrit,
        zero if lo is None else lo, zero if hi is None else hi,
        lo is not None, hi is not None, src, src_params, float(cfl), float(guard))
    U = _to_physical(U, side)
    reason = _to_physical(reason, side)
    return Field2D(grid=grid, values=np.ascontiguousarray(U)[..., None],
                   valid=np.ascontiguousarray(reason == 0), reason=np.ascontiguousarray(reason),
                   origin=side, substeps=int(nsub))


# ---------------------------------------------------------------------------
# Systems
# ---------------------------------------------------------------------------

def _invert_batch(model, V, U, tol=1e-12, max_iter=50):
    """Batched Newton for ``flux_x(U) = V``; returns ``(U, converged)``."""
    U = U.copy()
    scale = tol * np.maximum(1.0, np.max(np.abs(V), axis=-1))
    conv = np.zeros(U.shape[0], dtype=bool)
    for _ in range(max_iter):
        r = model.flux_x(U) - V
        conv = np.max(np.abs(r), axis=-1) <= scale
        if np.all(conv):
            break
        act = ~conv
        with np.errstate(all="ignore"):
            dU = np.linalg.solve(model.jacobian_x(U[act]), r[act][..., None])[..., 0]
        U[act] -= dU
        bad = ~np.all(np.isfinite(U), axis=-1)
        if np.any(bad):
            U[bad] = np.nan
            conv[bad] = False
            break
    return U, conv


def sweep_system(model, side, grid, cfl=CFL, guard=PARAXIAL_GUARD):
    """Left-to-right paraxial sweep of the 2D Euler equations.

    Marches ``V = f(U)`` in ``x`` with a Rusanov transverse flux on
    ``g(f^-1(V))``.  The bottom wall is a mirror ghost, the top node is held
    at the prescribed state, and the right side is free.  Nodes where
    ``u - c`` drops below ``guard * (u + c)`` are masked.
    """
    if side != "left":
        raise ConfigError("system sweeps are implemented from the left side only", side=side)
    bc = model.boundary
    x, y = grid.x, grid.y
    hx, hy = grid.hx, grid.hy
    my, mx = grid.my, grid.mx
    U = np.empty((my, mx, model.n))
    U[:] = np.nan
    valid = np.zeros((my, mx), dtype=bool)
    reason = np.zeros((my, mx), dtype=np.int8)

    row = np.broadcast_to(bc["left"][1], (my, model.n)).copy()
    top_fixed = bc["top"][0] == "state"
    if top_fixed:
        row[-1] = bc["top"][1]
    ok = np.ones(my, dtype=bool)

    def degenerate(R):
        lam = model.eigenvalues_x(R)
        return ~(lam[..., 0] > guard * np.abs(lam[..., 3]))

    bad = degenerate(row)
    ok &= ~bad
    reason[bad, 0] = MASK_DEGENERATE
    U[ok, 0] = row[ok]
    valid[:, 0] = ok
    nsub = 0
    for k in range(mx - 1):
        remaining = hx
        while remaining > 1e-13 * hx:
            sig = np.abs(model.paraxial_speeds_x(row)).max(axis=-1)
            smax = float(np.max(sig[ok])) if np.any(ok) else 0.0
            ds = remaining
            if smax * ds > cfl * hy:
                ds = cfl * hy / smax
                if remaining - ds < 1e-9 * hx:
                    ds = remaining
            V = model.flux_x(row)
            ghost_lo = model.reflect(row[1]) if bc["bottom"][0] == "reflect" else row[0]
            ghost_hi = bc["top"][1] if top_fixed else row[-1]
            P = np.concatenate([ghost_lo[None], row, np.asarray(ghost_hi)[None]], axis=0)
            Pok = np.concatenate([[True], ok, [True]])
            # masked nodes mirror their valid neighbour
            Pl = P[:-1].copy()
            Pr = P[1:].copy()
            Pl[~Pok[:-1]] = Pr[~Pok[:-1]]
            Pr[~Pok[1:]] = Pl[~Pok[1:]]
            Vl, Vr = model.flux_x(Pl), model.flux_x(Pr)
            Gl, Gr = model.flux_y(Pl), model.flux_y(Pr)
            s = np.maximum(np.abs(model.paraxial_speeds_x(Pl)).max(-1),
                           np.abs(model.paraxial_speeds_x(Pr)).max(-1))[:, None]
            H = 0.5 * (Gl + Gr) - 0.5 * s * (Vr - Vl)
            Vn = V - ds / hy * (H[1:] - H[:-1])
            Un, conv = _invert_batch(model, Vn[ok], row[ok])
            idx = np.flatnonzero(ok)
            fail = idx[~conv]
            row[idx[conv]] = Un[conv]
            ok[fail] = False
            reason[fail, k + 1] = MASK_INVERSION
            if top_fixed:
                row[-1] = bc["top"][1]
            deg = ok & degenerate(row)
            ok &= ~deg
            reason[deg, k + 1] = MASK_DEGENERATE
            remaining -= ds
            nsub += 1
        U[ok, k + 1] = row[ok]
        valid[:, k + 1] = ok
        reason[(~ok) & (reason[:, k + 1] == 0), k + 1] = MASK_UPSTREAM
    return Field2D(grid=grid, values=U, valid=valid, reason=reason, origin=side, substeps=nsub)


def sweep(model, side, grid, **kwargs):
    """Dispatch to ``sweep_scalar`` or ``sweep_system``."""
    if getattr(model, "n", 1) == 1:
        return sweep_scalar(model, side, grid, **kwargs)
    return sweep_system(model, side, grid, **kwargs)


def conservation_residual(model, field, interior=1):
    """Centered residual ``D_x f + D_y g - a`` of a scalar field at interior nodes."""
    g = field.grid
    u = field.u
    X, Y = g.mesh()
    R = np.full(u.shape, np.nan)
    fx = (model.f(u[1:-1, 2:]) - model.f(u[1:-1, :-2])) / (2.0 * g.hx)
    gy = (model.g(u[2:, 1:-1]) - model.g(u[:-2, 1:-1])) / (2.0 * g.hy)
    R[1:-1, 1:-1] = fx + gy - model.source(u[1:-1, 1:-1], X[1:-1, 1:-1], Y[1:-1, 1:-1])
    return R


def shock_loci(field, component=0, threshold=0.3, reach=4):
    """Discontinuity points of one component, scanned along each grid row.

    The windowed jump ``|q[i + reach] - q[i - reach]|`` is computed along
    every row; where it exceeds ``threshold`` and is a local maximum within
    ``reach`` nodes, the shock is placed at the midpoint of the steepest
    one-cell difference inside the window.  Returns rows
    ``(x, y, q_before, q_after)`` with the plateau values read ``reach``
    nodes either side of that cell.
    """
    g = field.grid
    w = int(reach)
    q = np.where(field.valid, field.values[..., component], np.nan)
    if g.mx <= 2 * w:
        return np.empty((0, 4))
    D = np.full(q.shape, np.nan)
    D[:, w:g.mx - w] = np.abs(q[:, 2 * w:] - q[:, :g.mx - 2 * w])
    step = np.abs(np.diff(q, axis=1))
    out = []
    for j in range(g.my):
        row = D[j]
        seen = set()
        for i in range(w, g.mx - w):
            if not row[i] > threshold:
                continue
            win = row[max(w, i - w):i + w + 1]
            if row[i] < np.nanmax(win):
                continue
            seg = step[j, i - w:i + w]
            if np.all(np.isnan(seg)):
                continue
            k = i - w + int(np.nanargmax(seg))
            if k in seen:
                continue
            seen.add(k)
            lo, hi = max(0, k - w + 1), min(g.mx - 1, k + w)
            out.append((g.x[0] + (k + 0.5) * g.hx, g.y[j], q[j, lo], q[j, hi]))
    return np.array(out).reshape(-1, 4)
