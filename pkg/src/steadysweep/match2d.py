"""Shock-curve matching between 2D solution branches.

A curve is grown one grid cell at a time from a boundary point where two
branches disagree.  At each entry point the flux jumps ``[[f]]``, ``[[g]]``
are interpolated from the cell corners; the stationary jump condition
``n1 [[f]] + n2 [[g]] = 0`` fixes the curve direction up to sign, and the
entropy inequalities fix the normal orientation.  When no orientation is
entropy-admissible (for instance when both fluxes coincide), the exit side
of the next cell is instead chosen where both flux jumps change sign, so
the jump in flux across the curve is as close to zero as possible.

Geometry is carried out in grid index coordinates, where cells are unit
squares and cell edges lie on integer lines.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import (ConfigError, CoverageError, CurveLoopError, EntropyViolationError,
                     IncompleteCurveError)
from .sweep2d import Field2D, Grid2D, sweep

logger = logging.getLogger(__name__)

ENTROPY_TOL = 1e-10
SNAP = 1e-10
_EPS = 1e-7


# ---------------------------------------------------------------------------
# Segment normal
# ---------------------------------------------------------------------------

def _margins(model, n, u_minus, u_plus):
    a_m = n[0] * model.df(u_minus) + n[1] * model.dg(u_minus)
    a_p = n[0] * model.df(u_plus) + n[1] * model.dg(u_plus)
    return float(a_m), float(-a_p)


def _orient(model, n, u_minus, u_plus, tol=ENTROPY_TOL):
    """Orient the unit vector ``n`` so that both entropy margins are positive.

    Returns ``(n, margins)`` or ``None`` when neither sign is admissible.
    """
    scale = max(abs(model.df(u_minus)), abs(model.dg(u_minus)),
                abs(model.df(u_plus)), abs(model.dg(u_plus)), 1e-300)
    for s in (1.0, -1.0):
        m = _margins(model, (s * n[0], s * n[1]), u_minus, u_plus)
        if m[0] > tol * scale and m[1] > tol * scale:
            return (s * n[0], s * n[1]), m
    return None


def segment_normal(model, u_minus, u_plus, tol=ENTROPY_TOL):
    """Unit normal of a stationary scalar shock between ``u_minus`` and ``u_plus``.

    ``n`` is orthogonal to ``([[f]], [[g]])`` and oriented from the minus
    state to the plus state so that characteristics enter the shock from
    both sides.

    Raises
    ------
    EntropyViolationError
        If the states coincide, the flux jump vanishes, or neither
        orientation satisfies the entropy inequalities.
    """
    if getattr(model, "n", 1) != 1:
        raise ConfigError("curve matching is implemented for scalar laws")
    u_minus, u_plus = float(u_minus), float(u_plus)
    if u_minus == u_plus:
        raise EntropyViolationError("no jump between the states", u_minus=u_minus)
    Jf = float(model.f(u_plus) - model.f(u_minus))
    Jg = float(model.g(u_plus) - model.g(u_minus))
    norm = math.hypot(Jf, Jg)
    if norm == 0.0:
        raise EntropyViolationError("flux jump vanishes; direction undetermined",
                                    u_minus=u_minus, u_plus=u_plus)
    res = _orient(model, (Jg / norm, -Jf / norm), u_minus, u_plus, tol)
    if res is None:
        raise EntropyViolationError("no entropy-admissible orientation",
                                    u_minus=u_minus, u_plus=u_plus)
    return np.array(res[0])


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------

@njit(cache=True)
def _polyline_distance(px, py, vx, vy):
    out = np.empty(px.size)
    for p in range(px.size):
        best = np.inf
        for k in range(vx.size - 1):
            ax, ay = vx[k], vy[k]
            bx, by = vx[k + 1] - ax, vy[k + 1] - ay
            L2 = bx * bx + by * by
            t = 0.0
            if L2 > 0.0:
                t = min(1.0, max(0.0, ((px[p] - ax) * bx + (py[p] - ay) * by) / L2))
            d = math.hypot(px[p] - ax - t * bx, py[p] - ay - t * by)
            if d < best:
                best = d
        out[p] = best
    return out


@dataclass
class ShockCurve:
    """Polyline shock curve, one segment per grid cell.

    ``vertices`` are physical coordinates and ``index_vertices`` the same
    points in grid index coordinates (cell edges at integers).  ``normals``
    point from the minus branch to the plus branch.
    """

    grid: Grid2D
    index_vertices: np.ndarray
    normals: np.ndarray
    rh_residual: np.ndarray
    entropy_margins: np.ndarray
    degenerate: np.ndarray
    cells: list
    minus_origin: str
    plus_origin: str
    complete: bool = True

    @property
    def vertices(self):
        g = self.grid
        P = np.asarray(self.index_vertices, dtype=float).reshape(-1, 2)
        return np.column_stack([g.xlim[0] + g.hx * P[:, 0], g.ylim[0] + g.hy * P[:, 1]])

    @property
    def n_segments(self):
        return len(self.cells)

    def edge_params(self):
        """Per vertex ``(axis, line, offset)``: the vertex lies on grid line
        ``line`` of ``axis`` ("x" for vertical lines) at fractional offset
        ``offset`` along the other axis."""
        out = []
        for xi, eta in self.index_vertices:
            if float(xi).is_integer():
                out.append(("x", int(xi), float(eta)))
            else:
                out.append(("y", int(eta), float(xi)))
        return out

    def length(self):
        d = np.diff(self.vertices, axis=0)
        return float(np.sum(np.hypot(d[:, 0], d[:, 1])))

    def distance_to(self, points):
        """Euclidean distance from each of ``points`` (k, 2) to the polyline."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        V = self.vertices
        if len(V) == 1:
            return np.hypot(P[:, 0] - V[0, 0], P[:, 1] - V[0, 1])
        return _polyline_distance(P[:, 0].copy(), P[:, 1].copy(), V[:, 0].copy(), V[:, 1].copy())

    def to_rows(self):
        """CSV-ready rows ``(k, x, y, n1, n2, rh_residual, margin_minus, margin_plus, degenerate)``.

        Row ``k`` holds vertex ``k`` and the diagnostics of the segment that
        starts there; the last vertex carries NaN diagnostics.
        """
        V = self.vertices
        rows = []
        for k in range(len(V)):
            if k < self.n_segments:
                n = self.normals[k]
                m = self.entropy_margins[k]
                rows.append((k, V[k, 0], V[k, 1], n[0], n[1], self.rh_residual[k], m[0], m[1],
                             int(self.degenerate[k])))
            else:
                rows.append((k, V[k, 0], V[k, 1]) + (math.nan,) * 5 + (0,))
        return rows

    def summary(self):
        return {"segments": self.n_segments, "degenerate_segments": int(np.sum(self.degenerate)),
                "start": self.vertices[0].tolist(), "end": self.vertices[-1].tolist(),
                "length": self.length(), "complete": self.complete,
                "max_rh_residual": float(np.max(np.abs(self.rh_residual))) if self.n_segments else 0.0,
                "min_entropy_margin": float(np.min(self.entropy_margins)) if self.n_segments else 0.0,
                "minus": self.minus_origin, "plus": self.plus_origin}


def _filled(field_, passes=2):
    """Scalar branch values with masked nodes replaced by the mean of valid
    neighbours, repeated ``passes`` times; remaining nodes are NaN."""
    u = np.where(field_.valid, field_.u, np.nan)
    for _ in range(passes):
        miss = np.isnan(u)
        if not miss.any():
            break
        P = np.pad(u, 1, constant_values=np.nan)
        stack = np.stack([P[1 + di:P.shape[0] - 1 + di, 1 + dj:P.shape[1] - 1 + dj]
                          for di in (-1, 0, 1) for dj in (-1, 0, 1) if di or dj])
        cnt = np.sum(~np.isnan(stack), axis=0)
        with np.errstate(invalid="ignore"):
            mean = np.nansum(stack, axis=0) / np.where(cnt > 0, cnt, 1)
        u = np.where(miss & (cnt > 0), mean, u)
    return u


@njit(cache=True)
def _f(c, u):
    return ((c[3] * u + c[2]) * u + c[1]) * u + c[0]


@njit(cache=True)
def _df(c, u):
    return (3.0 * c[3] * u + 2.0 * c[2]) * u + c[1]


@njit(cache=True)
def _orient_nb(Fc, Gc, n1, n2, um, up, tol):
    """Sign (+1, -1) making both entropy margins positive, or 0."""
    fm, gm = _df(Fc, um), _df(Gc, um)
    fp, gp = _df(Fc, up), _df(Gc, up)
    scale = max(max(abs(fm), abs(gm)), max(max(abs(fp), abs(gp)), 1e-300)) * tol
    am = n1 * fm + n2 * gm
    ap = n1 * fp + n2 * gp
    if am > scale and -ap > scale:
        return 1.0, am, -ap
    if -am > scale and ap > scale:
        return -1.0, -am, ap
    return 0.0, 0.0, 0.0


@njit(cache=True)
def _interp(arr, px, py, ci, cj):
    a = px - ci
    b = py - cj
    tot = 0.0
    val = 0.0
    for k in range(4):
        di = k % 2
        dj = k // 2
        w = (a if di else 1.0 - a) * (b if dj else 1.0 - b)
        if w <= 1e-14:
            continue
        v = arr[cj + dj, ci + di]
        if v == v:
            tot += w
            val += w * v
    if tot > 0.0:
        return val / tot
    return np.nan


@njit(cache=True)
def _cell_of(px, py, W, H):
    if px < -SNAP or px > W + SNAP or py < -SNAP or py > H + SNAP:
        return -1, -1
    i = min(max(int(math.floor(px)), 0), W - 1)
    j = min(max(int(math.floor(py)), 0), H - 1)
    return i, j


@njit(cache=True)
def _snap1(c, hi):
    r = round(c)
    if abs(c - r) <= SNAP:
        c = float(r)
    return min(max(c, 0.0), float(hi))


@njit(cache=True)
def _on_boundary(px, py, W, H):
    return px <= SNAP or px >= W - SNAP or py <= SNAP or py >= H - SNAP


@njit(cache=True)
def _walk(um, up, Jf, Jg, Fc, Gc, hx, hy, sx, sy, max_cells, tol):
    """Grow a curve from the index point ``(sx, sy)``.

    Returns ``(status, count, verts, normals, rh, margins, degenerate, cells)``
    with status 0 complete, 1 no jump at the seed, 2 invalid data,
    3 no admissible exit, 4 loop, 5 cell budget exceeded.
    """
    H, W = um.shape[0] - 1, um.shape[1] - 1
    verts = np.empty((max_cells + 1, 2))
    normals = np.empty((max_cells, 2))
    rh = np.empty(max_cells)
    margins = np.empty((max_cells, 2))
    degen = np.zeros(max_cells, dtype=np.bool_)
    cells = np.empty((max_cells, 2), dtype=np.int64)
    visited = np.zeros((H, W), dtype=np.bool_)
    px, py = _snap1(sx, W), _snap1(sy, H)
    verts[0, 0], verts[0, 1] = px, py
    count = 0
    pci, pcj = -1, -1
    tpx, tpy = 0.0, 0.0
    has_prev = False
    ci0, cj0 = _cell_of(px, py, W, H)
    a = _interp(um, px, py, ci0, cj0)
    b = _interp(up, px, py, ci0, cj0)
    if not (a == a and b == b) or abs(b - a) <= 1e-12 * max(1.0, abs(a)):
        return 1, 0, verts, normals, rh, margins, degen, cells
    while True:
        if count >= max_cells:
            return 5, count, verts, normals, rh, margins, degen, cells
        ci, cj = _cell_of(px, py, W, H)
        u_m = _interp(um, px, py, ci, cj)
        u_p = _interp(up, px, py, ci, cj)
        if not (u_m == u_m and u_p == u_p):
            return 2, count, verts, normals, rh, margins, degen, cells
        jf = _f(Fc, u_p) - _f(Fc, u_m)
        jg = _f(Gc, u_p) - _f(Gc, u_m)
        norm = math.hypot(jf, jg)
        done = False
        if u_m != u_p and norm > 0.0:
            s, m0, m1 = _orient_nb(Fc, Gc, jg / norm, -jf / norm, u_m, u_p, tol)
            if s != 0.0:
                n1, n2 = s * jg / norm, -s * jf / norm
                t1, t2 = -n2, n1
                if has_prev:
                    flip = t1 * tpx + t2 * tpy < 0.0
                else:
                    w1 = (1.0 if px <= SNAP else 0.0) - (1.0 if px >= W - SNAP else 0.0)
                    w2 = (1.0 if py <= SNAP else 0.0) - (1.0 if py >= H - SNAP else 0.0)
                    if w1 == 0.0 and w2 == 0.0:
                        w1, w2 = W / 2.0 - px, H / 2.0 - py
                    flip = t1 * w1 * hx + t2 * w2 * hy < 0.0
                if flip:
                    t1, t2 = -t1, -t2
                ti, tj = t1 / hx, t2 / hy
                ni, nj = _cell_of(px + _EPS * ti, py + _EPS * tj, W, H)
                if ni < 0:
                    if has_prev:
                        return 0, count, verts, normals, rh, margins, degen, cells
                elif visited[nj, ni]:
                    return 4, count, verts, normals, rh, margins, degen, cells
                else:
                    sm = np.inf
                    if ti > 0:
                        sm = min(sm, (ni + 1 - px) / ti)
                    elif ti < 0:
                        sm = min(sm, (ni - px) / ti)
                    if tj > 0:
                        sm = min(sm, (nj + 1 - py) / tj)
                    elif tj < 0:
                        sm = min(sm, (nj - py) / tj)
                    qx = _snap1(px + sm * ti, W)
                    qy = _snap1(py + sm * tj, H)
                    normals[count, 0], normals[count, 1] = n1, n2
                    margins[count, 0], margins[count, 1] = m0, m1
                    rh[count] = n1 * jf + n2 * jg
                    degen[count] = False
                    ci, cj = ni, nj
                    done = True
        if not done:
            if has_prev and _on_boundary(px, py, W, H):
                return 0, count, verts, normals, rh, margins, degen, cells
            # degenerate rule: exit where the flux jumps change sign
            best_key0 = np.inf
            best_key1 = np.inf
            found = False
            bqx = bqy = bn1 = bn2 = bm0 = bm1 = 0.0
            bci = bcj = 0
            xs0 = int(px) - 1 if px == math.floor(px) else int(math.floor(px))
            ys0 = int(py) - 1 if py == math.floor(py) else int(math.floor(py))
            xs1 = int(px) if px == math.floor(px) else xs0
            ys1 = int(py) if py == math.floor(py) else ys0
            for ii in range(xs0, xs1 + 1):
                for jj in range(ys0, ys1 + 1):
                    if ii < 0 or jj < 0 or ii >= W or jj >= H:
                        continue
                    if (ii == pci and jj == pcj) or visited[jj, ii]:
                        continue
                    for side in range(4):
                        if side == 0:
                            ax, ay, bx, by = ii, jj, ii + 1, jj
                        elif side == 1:
                            ax, ay, bx, by = ii + 1, jj, ii + 1, jj + 1
                        elif side == 2:
                            ax, ay, bx, by = ii + 1, jj + 1, ii, jj + 1
                        else:
                            ax, ay, bx, by = ii, jj + 1, ii, jj
                        if ax == bx:
                            if abs(px - ax) <= SNAP and min(ay, by) - SNAP <= py <= max(ay, by) + SNAP:
                                continue
                        elif abs(py - ay) <= SNAP and min(ax, bx) - SNAP <= px <= max(ax, bx) + SNAP:
                            continue
                        fa, ga = Jf[ay, ax], Jg[ay, ax]
                        fb, gb = Jf[by, bx], Jg[by, bx]
                        if not (fa == fa and ga == ga and fb == fb and gb == gb):
                            continue
                        score = max(fa * fb, ga * gb)
                        tau = 0.0
                        bestv = abs(fa) + abs(ga)
                        v1 = abs(fb) + abs(gb)
                        if v1 < bestv:
                            tau, bestv = 1.0, v1
                        for r in range(2):
                            ja = fa if r == 0 else ga
                            jb = fb if r == 0 else gb
                            if ja * jb < 0.0:
                                tz = ja / (ja - jb)
                                vz = abs(fa + tz * (fb - fa)) + abs(ga + tz * (gb - ga))
                                if vz < bestv:
                                    tau, bestv = tz, vz
                        qx = _snap1(ax + tau * (bx - ax), W)
                        qy = _snap1(ay + tau * (by - ay), H)
                        d1, d2 = (qx - px) * hx, (qy - py) * hy
                        L = math.hypot(d1, d2)
                        if L == 0.0:
                            continue
                        mx_, my_ = 0.5 * (px + qx), 0.5 * (py + qy)
                        um_ = _interp(um, mx_, my_, ii, jj)
                        up_ = _interp(up, mx_, my_, ii, jj)
                        if not (um_ == um_ and up_ == up_):
                            continue
                        s, m0, m1 = _orient_nb(Fc, Gc, -d2 / L, d1 / L, um_, up_, tol)
                        if s == 0.0:
                            continue
                        if score < best_key0 or (score == best_key0 and bestv < best_key1):
                            best_key0, best_key1 = score, bestv
                            found = True
                            bqx, bqy, bci, bcj = qx, qy, ii, jj
                            bn1, bn2, bm0, bm1 = -s * d2 / L, s * d1 / L, m0, m1
            if not found:
                return 3, count, verts, normals, rh, margins, degen, cells
            qx, qy, ci, cj = bqx, bqy, bci, bcj
            normals[count, 0], normals[count, 1] = bn1, bn2
            margins[count, 0], margins[count, 1] = bm0, bm1
            rh[count] = bn1 * jf + bn2 * jg
            degen[count] = True
        visited[cj, ci] = True
        cells[count, 0], cells[count, 1] = ci, cj
        d1, d2 = (qx - px) * hx, (qy - py) * hy
        if d1 != 0.0 or d2 != 0.0:
            tpx, tpy = d1, d2
            has_prev = True
        count += 1
        verts[count, 0], verts[count, 1] = qx, qy
        pci, pcj = ci, cj
        px, py = qx, qy
        if _on_boundary(px, py, W, H):
            return 0, count, verts, normals, rh, margins, degen, cells


_WALK_MESSAGES = {
    1: "branches do not jump at the seed",
    2: "curve left the valid branch regions",
    3: "no entropy-admissible exit side",
    4: "curve re-entered a visited cell",
    5: "curve exceeded the cell budget",
}


def grow_curve(model, branch_minus, branch_plus, seed, max_cells=None):
    """Grow the shock curve separating two branches from a boundary seed.

    Parameters
    ----------
    model : ScalarLaw2D
    branch_minus, branch_plus : Field2D
        Branches on the two sides; normals point from minus to plus.
    seed : (x, y)
        Physical boundary point where the branches disagree.

    Returns
    -------
    ShockCurve

    Raises
    ------
    IncompleteCurveError
        The branches agree at the seed, or the curve runs out of valid data
        or admissible directions before reaching the boundary.
    CurveLoopError
        A cell is visited twice.
    """
    if getattr(model, "n", 1) != 1:
        raise ConfigError("curve matching is implemented for scalar laws")
    if branch_minus.grid != branch_plus.grid:
        raise ConfigError("branches live on different grids")
    g = branch_minus.grid
    sx = (seed[0] - g.xlim[0]) / g.hx
    sy = (seed[1] - g.ylim[0]) / g.hy
    W, H = g.mx - 1, g.my - 1
    if not (-SNAP <= sx <= W + SNAP and -SNAP <= sy <= H + SNAP) or not (
            min(sx, W - sx, sy, H - sy) <= SNAP):
        raise ConfigError("seed must lie on the domain boundary", seed=list(seed))
    um, up = _filled(branch_minus), _filled(branch_plus)
    Fc = np.array(model.flux_x.coef, dtype=float)
    Gc = np.array(model.flux_y.coef, dtype=float)
    with np.errstate(invalid="ignore"):
        Jf = model.f(up) - model.f(um)
        Jg = model.g(up) - model.g(um)
    budget = int(max_cells or 4 * (W + H) + 64)
    status, k, V, Nn, R, M, D, C = _walk(um, up, Jf, Jg, Fc, Gc, g.hx, g.hy, float(sx), float(sy),
                                         budget, ENTROPY_TOL)
    curve = ShockCurve(grid=g, index_vertices=V[:k + 1].copy(), normals=Nn[:k].copy(),
                       rh_residual=R[:k].copy(), entropy_margins=M[:k].copy(),
                       degenerate=D[:k].copy(), cells=[tuple(c) for c in C[:k].tolist()],
                       minus_origin=branch_minus.origin, plus_origin=branch_plus.origin,
                       complete=status == 0)
    if status in (4, 5):
        raise CurveLoopError(_WALK_MESSAGES[status], partial=curve, segments=k)
    if status:
        raise IncompleteCurveError(_WALK_MESSAGES[status], partial=curve, segments=k,
                                   at=curve.vertices[-1].tolist())
    ndeg = int(np.sum(curve.degenerate))
    if ndeg:
        logger.info("curve %s|%s: %d of %d segments used the degenerate entropy rule",
                    curve.minus_origin, curve.plus_origin, ndeg, curve.n_segments)
    return curve


# ---------------------------------------------------------------------------
# Masks
# ---------------------------------------------------------------------------

@njit(cache=True)
def _scanline_inside(px, py, mx, my, delta):
    """Even-odd test of every grid node against the closed polygon (px, py)."""
    W = mx - 1.0
    H = my - 1.0
    m = px.size
    out = np.zeros((my, mx), dtype=np.bool_)
    xs = np.empty(m)
    for j in range(my):
        y = min(max(float(j), delta), H - delta)
        k = 0
        for e in range(m):
            x1, y1 = px[e], py[e]
            x2, y2 = px[(e + 1) % m], py[(e + 1) % m]
            if (y1 <= y < y2) or (y2 <= y < y1):
                xs[k] = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
                k += 1
        cr = np.sort(xs[:k])
        for i in range(mx):
            x = min(max(float(i), delta), W - delta)
            c = np.searchsorted(cr, x)
            out[j, i] = c % 2 == 1
    return out


@dataclass
class PartitionMask:
    """Per-node labels induced by one curve; ``plus[j, i]`` is True on the plus side."""

    curve: ShockCurve
    plus: np.ndarray

    @property
    def minus(self):
        return ~self.plus


def _perimeter(p, W, H):
    x, y = p
    if y <= SNAP:
        return x
    if x >= W - SNAP:
        return W + y
    if y >= H - SNAP:
        return W + H + (W - x)
    return 2 * W + H + (H - y)


def partition_mask(curve):
    """Label grid nodes by the side of ``curve`` they fall on.

    The curve is closed counter-clockwise along the domain boundary from its
    end back to its start; the enclosed region lies left of the curve.  The
    plus side is the one the segment normals point to (majority vote).
    """
    g = curve.grid
    W, H = g.mx - 1.0, g.my - 1.0
    V = [tuple(v) for v in curve.index_vertices]
    s0 = _perimeter(V[0], W, H)
    s1 = _perimeter(V[-1], W, H)
    L = 2 * (W + H)
    corners = [(0.0, (0.0, 0.0)), (W, (W, 0.0)), (W + H, (W, H)), (2 * W + H, (0.0, H))]
    span = (s0 - s1) % L
    walk = sorted(((s - s1) % L, c) for s, c in corners if 0.0 < (s - s1) % L < span)
    poly = V + [c for _, c in walk]
    px = np.array([v[0] for v in poly])
    py = np.array([v[1] for v in poly])
    inside = _scanline_inside(px, py, g.mx, g.my, 1e-7)
    P = curve.index_vertices
    votes = 0
    for k in range(curve.n_segments):
        d = (P[k + 1, 0] - P[k, 0]) * g.hx, (P[k + 1, 1] - P[k, 1]) * g.hy
        votes += 1 if (-d[1] * curve.normals[k, 0] + d[0] * curve.normals[k, 1]) > 0 else -1
    return PartitionMask(curve=curve, plus=inside if votes > 0 else ~inside)


# ---------------------------------------------------------------------------
# Merging
# ---------------------------------------------------------------------------

@dataclass
class MergedSolution2D:
    """Steady field assembled from branches; ``source`` names the branch used per node."""

    grid: Grid2D
    values: np.ndarray
    valid: np.ndarray
    source: np.ndarray
    curves: list
    branches: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def u(self):
        return self.values[..., 0]

    def as_field(self):
        return Field2D(grid=self.grid, values=self.values, valid=self.valid,
                       reason=np.where(self.valid, 0, 3).astype(np.int8), origin="merged")

    def summary(self):
        names, counts = np.unique(self.source, return_counts=True)
        return {"nodes": int(self.valid.size), "coverage": float(np.mean(self.valid)),
                "curves": [c.summary() for c in self.curves],
                "branch_nodes": {str(k): int(v) for k, v in zip(names, counts)},
                **self.diagnostics}


def _as_merged(f):
    if isinstance(f, MergedSolution2D):
        return f
    return MergedSolution2D(grid=f.grid, values=f.values.copy(), valid=f.valid.copy(),
                            source=np.full(f.valid.shape, f.origin, dtype=object), curves=[],
                            branches={f.origin: f})


def merge_pair(current, other, curve):
    """Replace ``current`` by ``other`` on the side of ``curve`` that belongs to ``other``."""
    cur = _as_merged(current)
    mask = partition_mask(curve)
    other_origin = getattr(other, "origin", "merged")
    take = mask.plus if curve.plus_origin == other_origin else mask.minus
    values = np.where(take[..., None], other.values, cur.values)
    valid = np.where(take, other.valid, cur.valid)
    source = np.where(take, other_origin, cur.source)
    gap = ~valid
    if gap.any():
        # nodes next to the curve may fall back to the branch on the other side
        g = cur.grid
        X, Y = g.mesh()
        alt_valid = np.where(take, cur.valid, other.valid)
        cand = gap & alt_valid
        if cand.any():
            d = curve.distance_to(np.column_stack([X[cand], Y[cand]]))
            near = np.zeros_like(gap)
            near[cand] = d <= math.sqrt(2.0) * max(g.hx, g.hy)
            values = np.where((near & take)[..., None], cur.values, values)
            values = np.where((near & ~take)[..., None], other.values, values)
            source = np.where(near & take, cur.source, np.where(near & ~take, other_origin, source))
            valid = valid | near
    if not valid.all():
        bad = np.argwhere(~valid)
        raise CoverageError("nodes covered by no valid branch", count=int(len(bad)),
                            nodes=bad[:50].tolist())
    branches = dict(cur.branches)
    if isinstance(other, Field2D):
        branches[other.origin] = other
    return MergedSolution2D(grid=cur.grid, values=values, valid=valid, source=source,
                            curves=cur.curves + [curve], branches=branches,
                            diagnostics=dict(cur.diagnostics))


def merge(branches, curves):
    """Merge branches pairwise in order: curve ``k`` separates the running
    result from ``branches[k + 1]``."""
    if len(curves) != len(branches) - 1:
        raise ConfigError("need one curve per additional branch",
                          branches=len(branches), curves=len(curves))
    out = _as_merged(branches[0])
    if not out.valid.all() and not curves:
        bad = np.argwhere(~out.valid)
        raise CoverageError("nodes covered by no valid branch", count=int(len(bad)),
                            nodes=bad[:50].tolist())
    for br, c in zip(branches[1:], curves):
        out = merge_pair(out, br, c)
    return out


# ---------------------------------------------------------------------------
# Seeds and plans
# ---------------------------------------------------------------------------

def _perimeter_nodes(grid):
    """Boundary nodes counter-clockwise from the lower-left corner, with the
    side each belongs to (corners go to the side that starts there)."""
    mx, my = grid.mx, grid.my
    I = np.concatenate([np.arange(mx - 1), np.full(my - 1, mx - 1), np.arange(mx - 1, 0, -1),
                        np.zeros(my - 1, dtype=int)])
    J = np.concatenate([np.zeros(mx - 1, dtype=int), np.arange(my - 1), np.full(mx - 1, my - 1),
                        np.arange(my - 1, 0, -1)])
    sides = ["bottom"] * (mx - 1) + ["right"] * (my - 1) + ["top"] * (mx - 1) + ["left"] * (my - 1)
    return I, J, sides


def find_seed(model, branch_minus, branch_plus):
    """Boundary point where the branch labelling of the boundary data switches.

    Each boundary node is given to the branch closer to the boundary data
    there.  Among label switches the one with the largest data jump wins;
    near-ties go to a switch touching a corner, whose corner is returned.
    """
    g = branch_minus.grid
    I, J, sides = _perimeter_nodes(g)
    ub = np.full(I.size, np.nan)
    pos = 0
    for side, (n, coords) in (("bottom", (g.mx - 1, g.x[:-1])), ("right", (g.my - 1, g.y[:-1])),
                              ("top", (g.mx - 1, g.x[:0:-1])), ("left", (g.my - 1, g.y[:0:-1]))):
        vals = model.boundary_values(side, coords)
        if vals is not None:
            ub[pos:pos + n] = vals
        pos += n
    um = np.where(branch_minus.valid, branch_minus.u, np.nan)[J, I]
    up = np.where(branch_plus.valid, branch_plus.u, np.nan)[J, I]
    with np.errstate(invalid="ignore"):
        dm = np.where(np.isfinite(um), np.abs(ub - um), np.inf)
        dp = np.where(np.isfinite(up), np.abs(ub - up), np.inf)
    known = np.isfinite(ub) & (dm != dp)
    plus = dp < dm
    nxt = np.roll(np.arange(I.size), -1)
    switch = known & known[nxt] & (plus != plus[nxt])
    if not switch.any():
        raise IncompleteCurveError("no label switch on the boundary; branches do not meet")
    jump = np.abs(ub - ub[nxt])
    corners = {(0, 0), (g.mx - 1, 0), (g.mx - 1, g.my - 1), (0, g.my - 1)}
    cands = []
    for a in np.flatnonzero(switch):
        b = nxt[a]
        corner = next(((int(I[c]), int(J[c])) for c in (a, b) if (int(I[c]), int(J[c])) in corners), None)
        cands.append((float(jump[a]), corner, a, b))
    top = max(c[0] for c in cands)
    near = [c for c in cands if c[0] >= top * (1.0 - 1e-6)]
    pick = next((c for c in near if c[1] is not None), near[0])
    if pick[1] is not None:
        i, j = pick[1]
        return (float(g.x[i]), float(g.y[j]))
    a, b = pick[2], pick[3]
    return (0.5 * (g.x[I[a]] + g.x[I[b]]), 0.5 * (g.y[J[a]] + g.y[J[b]]))


def solve_2d(model, grid, plan=None):
    """Run a model's sweep and merge plan.

    ``plan["sweeps"]`` lists origin sides; each entry of ``plan["merges"]``
    is ``[minus, plus, seed]`` where names refer to sweeps or ``"merged"``
    (the running result) and ``seed`` is a point or ``"auto"``.

    Returns
    -------
    MergedSolution2D
    """
    plan = model.plan if plan is None else plan
    timings = {}
    t0 = time.perf_counter()
    fields = {side: sweep(model, side, grid) for side in plan["sweeps"]}
    timings["branches"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    merges = plan.get("merges", [])
    if not merges:
        out = merge([fields[plan["sweeps"][0]]], [])
    else:
        out = None
        for minus_name, plus_name, seed in merges:
            current = out if minus_name == "merged" else fields[minus_name]
            other = fields[plus_name]
            fm = current.as_field() if isinstance(current, MergedSolution2D) else current
            if isinstance(seed, str):
                seed = find_seed(model, fm, other)
            curve = grow_curve(model, fm, other, seed)
            out = merge_pair(current, other, curve)
    timings["matching"] = time.perf_counter() - t0
    out.branches.update(fields)
    out.diagnostics["timings"] = timings
    out.diagnostics["degenerate_segments"] = int(sum(int(np.sum(c.degenerate)) for c in out.curves))
    out.diagnostics["cells_visited"] = int(sum(c.n_segments for c in out.curves))
    return out
