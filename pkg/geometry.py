"""
Curvilinear polygons described by ordered parametric boundary arcs.

Each arc is a regular smooth curve gamma: [0, 1] -> R^2 evaluable with its
first and second derivatives. A polygon is a closed, positively oriented
chain of arcs whose junctions are either smooth or convex corners (interior
opening angle below pi).
"""
import logging
import math
from functools import cached_property
from typing import NamedTuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.spatial import ConvexHull, cKDTree
from scipy.spatial.distance import pdist

from errors import DomainError

logger = logging.getLogger(__name__)

PARAM_TOL = 1e-12
CLOSURE_TOL = 1e-12
SMOOTH_TOL = 1e-9
CORNER_MARGIN = 1e-6
BOUNDARY_BAND = 1e-12
TIE_TOL = 1e-12

_GAUSS16 = leggauss(16)


class BoundaryArc:
    """Regular parametric arc; subclasses provide ``_eval``."""

    kind = 'arc'

    def __init__(self, arc_id):
        self.id = int(arc_id)

    def _eval(self, s, order):
        raise NotImplementedError

    def _check(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < -PARAM_TOL) or np.any(s > 1.0 + PARAM_TOL):
            raise DomainError(f'arc {self.id}: parameter outside [0, 1]')
        return np.clip(s, 0.0, 1.0)

    def point(self, s):
        return self._eval(self._check(s), 0)

    def tangent(self, s):
        return self._eval(self._check(s), 1)

    def second(self, s):
        return self._eval(self._check(s), 2)

    def normal(self, s):
        """Outward unit normal (the curve runs counterclockwise)."""
        t = self.tangent(s)
        t = t / np.linalg.norm(t, axis=-1, keepdims=True)
        return np.stack([t[..., 1], -t[..., 0]], axis=-1)

    @cached_property
    def endpoints(self):
        return self.point(0.0), self.point(1.0)

    @cached_property
    def _length_table(self):
        params = np.linspace(0.0, 1.0, 257)
        x, w = _GAUSS16
        a, b = params[:-1, None], params[1:, None]
        nodes = 0.5 * (b - a) * x[None, :] + 0.5 * (a + b)
        speed = np.linalg.norm(self._eval(nodes, 1), axis=-1)
        cells = 0.5 * (b[:, 0] - a[:, 0]) * (speed @ w)
        return params, np.concatenate([[0.0], np.cumsum(cells)])

    @property
    def length(self):
        return self._length_table[1][-1]

    def length_at(self, s):
        params, cum = self._length_table
        return np.interp(self._check(s), params, cum)

    def param_at_length(self, ell):
        params, cum = self._length_table
        return np.interp(ell, cum, params)

    def check_regular(self, samples=256):
        speed = np.linalg.norm(self.tangent(np.linspace(0.0, 1.0, samples)), axis=-1)
        if np.any(speed <= 0.0):
            raise DomainError(f'arc {self.id} is not regular')


class CircleArc(BoundaryArc):
    """c + R (cos theta, sin theta), theta running linearly from theta0 to theta1."""

    kind = 'circle'

    def __init__(self, arc_id, center, radius, theta0, theta1):
        super().__init__(arc_id)
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.theta0 = float(theta0)
        self.theta1 = float(theta1)
        if self.radius <= 0.0 or self.theta0 == self.theta1:
            raise DomainError(f'arc {arc_id}: degenerate circle arc')

    def _eval(self, s, order):
        span = self.theta1 - self.theta0
        theta = self.theta0 + span * s
        c, sn = np.cos(theta), np.sin(theta)
        if order == 0:
            return self.center + self.radius * np.stack([c, sn], axis=-1)
        if order == 1:
            return self.radius * span * np.stack([-sn, c], axis=-1)
        return -self.radius * span ** 2 * np.stack([c, sn], axis=-1)

    def describe(self):
        cx, cy = self.center
        return f'circle {cx!r} {cy!r} {self.radius!r} {self.theta0!r} {self.theta1!r}'


class PolarArc(BoundaryArc):
    """
    Polar graph c + rho(theta) (cos theta, sin theta) with
    rho(theta) = c0 + sum_k (a_k cos k theta + b_k sin k theta).
    """

    kind = 'polar'

    def __init__(self, arc_id, center, theta0, theta1, c0, harmonics=()):
        super().__init__(arc_id)
        self.center = np.asarray(center, dtype=float)
        self.theta0 = float(theta0)
        self.theta1 = float(theta1)
        self.c0 = float(c0)
        self.harmonics = tuple((int(k), float(a), float(b)) for k, a, b in harmonics)
        if self.theta0 == self.theta1:
            raise DomainError(f'arc {arc_id}: empty angle range')

    def _rho(self, theta):
        rho = np.full_like(theta, self.c0)
        d1 = np.zeros_like(theta)
        d2 = np.zeros_like(theta)
        for k, a, b in self.harmonics:
            ck, sk = np.cos(k * theta), np.sin(k * theta)
            rho += a * ck + b * sk
            d1 += k * (-a * sk + b * ck)
            d2 -= k * k * (a * ck + b * sk)
        return rho, d1, d2

    def _eval(self, s, order):
        span = self.theta1 - self.theta0
        theta = self.theta0 + span * s
        rho, d1, d2 = self._rho(theta)
        radial = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        normal = np.stack([-np.sin(theta), np.cos(theta)], axis=-1)
        if order == 0:
            if np.any(rho <= 0.0):
                raise DomainError(f'arc {self.id}: non-positive polar radius')
            return self.center + rho[..., None] * radial
        if order == 1:
            return span * (d1[..., None] * radial + rho[..., None] * normal)
        return span ** 2 * ((d2 - rho)[..., None] * radial + 2.0 * d1[..., None] * normal)

    def describe(self):
        cx, cy = self.center
        terms = ' '.join(f'{k} {a!r} {b!r}' for k, a, b in self.harmonics)
        return f'polar {cx!r} {cy!r} {self.theta0!r} {self.theta1!r} {self.c0!r} {terms}'.rstrip()


class Junction(NamedTuple):
    point: np.ndarray
    angle: float
    arc_in: int
    arc_out: int
    is_corner: bool


class ClosestPoint(NamedTuple):
    arc: int
    s: float
    distance: float


class BoundarySamples(NamedTuple):
    points: np.ndarray
    normals: np.ndarray
    arcs: np.ndarray
    params: np.ndarray
    positions: np.ndarray


class CurvilinearPolygon:
    """Closed positively oriented chain of boundary arcs."""

    def __init__(self, arcs, name=None):
        if not arcs:
            raise DomainError('a polygon needs at least one arc')
        self.arcs = tuple(arcs)
        self.name = name
        for i, arc in enumerate(self.arcs):
            if arc.id != i:
                raise DomainError(f'arc ids must be 0..n-1 in order, got {arc.id} at {i}')
            arc.check_regular()
        self.junctions = tuple(self._build_junctions())
        coarse = self._polyline_fixed(64)
        self.bounding_box = (*coarse.min(axis=0), *coarse.max(axis=0))
        x0, y0, x1, y1 = self.bounding_box
        self._scale = math.hypot(x1 - x0, y1 - y0)
        self._poly_tol = 1e-7 * self._scale
        self._poly, self._poly_arc, self._poly_param = self._polyline_adaptive(self._poly_tol)
        if self.signed_area <= 0.0:
            raise DomainError('boundary must be positively oriented')
        seg = np.roll(self._poly, -1, axis=0) - self._poly
        self._max_segment = float(np.linalg.norm(seg, axis=1).max())
        self._tree = cKDTree(self._poly)

    def __repr__(self):
        return f'<CurvilinearPolygon {self.name or "custom"} arcs={len(self.arcs)}>'

    def _build_junctions(self):
        n = len(self.arcs)
        for i in range(n):
            a, b = self.arcs[i], self.arcs[(i + 1) % n]
            end, start = a.point(1.0), b.point(0.0)
            if np.linalg.norm(end - start) > CLOSURE_TOL:
                raise DomainError(f'arc {a.id} does not end where arc {b.id} starts')
            t_in = a.tangent(1.0)
            t_out = b.tangent(0.0)
            cross = t_in[0] * t_out[1] - t_in[1] * t_out[0]
            turn = math.atan2(cross, float(t_in @ t_out))
            angle = math.pi - turn
            if abs(angle - math.pi) <= SMOOTH_TOL:
                yield Junction(end, math.pi, a.id, b.id, False)
                continue
            if not 0.0 < angle < math.pi - CORNER_MARGIN:
                raise DomainError(
                    f'corner between arcs {a.id} and {b.id} has opening {angle:.6f}, must be below pi')
            yield Junction(end, angle, a.id, b.id, True)

    @property
    def corners(self):
        return [j for j in self.junctions if j.is_corner]

    def _polyline_fixed(self, per_arc):
        s = np.linspace(0.0, 1.0, per_arc, endpoint=False)
        return np.concatenate([arc.point(s) for arc in self.arcs])

    def _polyline_adaptive(self, tol):
        points, arc_ids, params = [], [], []
        for arc in self.arcs:
            s = np.linspace(0.0, 1.0, 17)
            for _ in range(40):
                p = arc.point(s)
                mid = 0.5 * (s[:-1] + s[1:])
                chord_mid = 0.5 * (p[:-1] + p[1:])
                dev = np.linalg.norm(arc.point(mid) - chord_mid, axis=1)
                split = dev > tol
                if not split.any():
                    break
                s = np.sort(np.concatenate([s, mid[split]]))
            points.append(arc.point(s[:-1]))
            arc_ids.append(np.full(len(s) - 1, arc.id))
            params.append(s[:-1])
        return np.concatenate(points), np.concatenate(arc_ids), np.concatenate(params)

    @property
    def polyline(self):
        return self._poly

    @property
    def signed_area(self):
        x, y = self._poly[:, 0], self._poly[:, 1]
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))

    @cached_property
    def diameter(self):
        hull = ConvexHull(self._poly)
        return float(pdist(self._poly[hull.vertices]).max())

    @property
    def perimeter(self):
        return float(sum(arc.length for arc in self.arcs))

    @cached_property
    def inradius(self):
        x0, y0, x1, y1 = self.bounding_box
        gx, gy = np.meshgrid(np.linspace(x0, x1, 65), np.linspace(y0, y1, 65))
        grid = np.column_stack([gx.ravel(), gy.ravel()])
        grid = grid[contains(self, grid)]
        return float(closest_boundary_many(self, grid)[2].max())

    @cached_property
    def centroid(self):
        x, y = self._poly[:, 0], self._poly[:, 1]
        cross = x * np.roll(y, -1) - np.roll(x, -1) * y
        area = 0.5 * cross.sum()
        cx = ((x + np.roll(x, -1)) * cross).sum() / (6.0 * area)
        cy = ((y + np.roll(y, -1)) * cross).sum() / (6.0 * area)
        return np.array([cx, cy])

    def describe(self):
        return '\n'.join(arc.describe() for arc in self.arcs)


def arc_point(arc, s):
    """gamma(s) for s in [0, 1]."""
    return arc.point(s)


def _projection_residual(arc, P, s):
    return np.sum((arc._eval(s, 0) - P) * arc._eval(s, 1), axis=-1)


def _closest_on_arc(arc, P, samples=64, iters=60):
    grid = np.linspace(0.0, 1.0, samples)
    G = arc._eval(grid, 0)
    d2 = ((P[:, None, :] - G[None, :, :]) ** 2).sum(axis=-1)
    k = d2.argmin(axis=1)
    step = 1.0 / (samples - 1)
    s = grid[k].copy()
    lo = np.clip(s - step, 0.0, 1.0)
    hi = np.clip(s + step, 0.0, 1.0)
    g_lo = _projection_residual(arc, P, lo)
    g_hi = _projection_residual(arc, P, hi)
    # the minimum sits on an arc endpoint only when the bracket touches it
    at_lo = (lo == 0.0) & (g_lo >= 0.0)
    at_hi = ~at_lo & (hi == 1.0) & (g_hi <= 0.0)
    flat = ~(at_lo | at_hi) & ((g_lo >= 0.0) | (g_hi <= 0.0))
    lo[flat] = np.clip(s[flat] - 2.0 * step, 0.0, 1.0)
    hi[flat] = np.clip(s[flat] + 2.0 * step, 0.0, 1.0)
    s[at_lo] = lo[at_lo]
    s[at_hi] = hi[at_hi]
    active = ~(at_lo | at_hi)
    # safeguarded Newton on <gamma(s) - p, gamma'(s)> = 0 inside the sign bracket
    for _ in range(iters):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        sa, pa = s[idx], P[idx]
        r = arc._eval(sa, 0) - pa
        t = arc._eval(sa, 1)
        g = np.sum(r * t, axis=-1)
        dg = np.sum(t * t, axis=-1) + np.sum(r * arc._eval(sa, 2), axis=-1)
        lo_a = np.where(g < 0.0, sa, lo[idx])
        hi_a = np.where(g > 0.0, sa, hi[idx])
        with np.errstate(divide='ignore', invalid='ignore'):
            newton = sa - g / dg
        bad = ~np.isfinite(newton) | (dg <= 0.0) | (newton <= lo_a) | (newton >= hi_a)
        new = np.where(bad, 0.5 * (lo_a + hi_a), newton)
        new = np.where(g == 0.0, sa, new)
        s[idx], lo[idx], hi[idx] = new, lo_a, hi_a
        done = (np.abs(new - sa) <= 1e-15) | (hi_a - lo_a <= 1e-15)
        active[idx[done]] = False
    dist = np.linalg.norm(arc._eval(s, 0) - P, axis=-1)
    grid_dist = np.sqrt(d2[np.arange(len(P)), k])
    worse = dist > grid_dist
    s[worse], dist[worse] = grid[k[worse]], grid_dist[worse]
    return s, dist


def closest_boundary_many(polygon, P):
    """Vectorised closest boundary point: (arc ids, parameters, distances)."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    params, dists = [], []
    for arc in polygon.arcs:
        s, d = _closest_on_arc(arc, P)
        params.append(s)
        dists.append(d)
    params, dists = np.array(params), np.array(dists)
    best = dists.min(axis=0)
    # lowest arc id among ties
    choice = np.argmax(dists <= best + TIE_TOL, axis=0)
    cols = np.arange(P.shape[0])
    return choice, params[choice, cols], dists[choice, cols]


def closest_boundary(polygon, p):
    """Closest boundary point to p as (arc id, s*, distance)."""
    arcs, s, d = closest_boundary_many(polygon, np.asarray(p, dtype=float)[None, :])
    return ClosestPoint(int(arcs[0]), float(s[0]), float(d[0]))


def _outward_offsets(polygon, P, arcs, params):
    """Largest <p - gamma(s*), n> over the outward normals active at each closest point."""
    P = np.atleast_2d(P)
    out = np.empty(P.shape[0])
    for a, arc in enumerate(polygon.arcs):
        mask = arcs == a
        if not mask.any():
            continue
        s = params[mask]
        r = P[mask] - arc._eval(s, 0)
        out[mask] = np.sum(r * arc.normal(s), axis=-1)
    for corner in polygon.corners:
        on_corner = (((arcs == corner.arc_in) & (params >= 1.0 - PARAM_TOL))
                     | ((arcs == corner.arc_out) & (params <= PARAM_TOL)))
        if not on_corner.any():
            continue
        r = P[on_corner] - corner.point
        n_in = polygon.arcs[corner.arc_in].normal(1.0)
        n_out = polygon.arcs[corner.arc_out].normal(0.0)
        out[on_corner] = np.maximum(r @ n_in, r @ n_out)
    return out


def signed_distance(polygon, P):
    """Distance to the boundary, negative inside the domain."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    arcs, params, dist = closest_boundary_many(polygon, P)
    side = _outward_offsets(polygon, P, arcs, params)
    return np.where(side < 0.0, -dist, dist), arcs, params


def _even_odd(P, V, chunk=512):
    x0, y0 = V[:, 0], V[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    inside = np.zeros(P.shape[0], dtype=bool)
    for start in range(0, P.shape[0], chunk):
        px = P[start:start + chunk, 0][:, None]
        py = P[start:start + chunk, 1][:, None]
        straddle = (y0 > py) != (y1 > py)
        with np.errstate(divide='ignore', invalid='ignore'):
            xi = x0 + (py - y0) * (x1 - x0) / (y1 - y0)
        hits = np.count_nonzero(straddle & (px < xi), axis=1)
        inside[start:start + chunk] = hits % 2 == 1
    return inside


def contains(polygon, p):
    """
    True for points strictly inside the domain.

    Points away from the boundary are classified by even-odd ray crossing
    against the adaptive boundary polyline; points in the polyline's
    uncertainty band are decided from their exact closest boundary point.
    Points within BOUNDARY_BAND of the boundary are not contained.
    """
    P = np.asarray(p, dtype=float)
    single = P.ndim == 1
    P = np.atleast_2d(P)
    inside = _even_odd(P, polygon._poly)
    near, _ = polygon._tree.query(P)
    band = near <= polygon._max_segment + 10.0 * polygon._poly_tol
    if band.any():
        Q = P[band]
        arcs, params, dist = closest_boundary_many(polygon, Q)
        side = _outward_offsets(polygon, Q, arcs, params)
        inside[band] = (side < 0.0) & (dist > BOUNDARY_BAND)
    return bool(inside[0]) if single else inside


def boundary_samples(polygon, n):
    """n points equally spaced in arc length along the whole boundary, with outward normals."""
    lengths = np.array([arc.length for arc in polygon.arcs])
    starts = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    total = lengths.sum()
    positions = np.arange(n) * total / n
    arcs = np.clip(np.searchsorted(starts, positions, side='right') - 1, 0, len(lengths) - 1)
    points = np.empty((n, 2))
    normals = np.empty((n, 2))
    params = np.empty(n)
    for a, arc in enumerate(polygon.arcs):
        mask = arcs == a
        if not mask.any():
            continue
        s = arc.param_at_length(positions[mask] - starts[a])
        params[mask] = s
        points[mask] = arc.point(s)
        normals[mask] = arc.normal(s)
    return BoundarySamples(points, normals, arcs, params, positions)


def boundary_position(polygon, arcs, params):
    """Arc-length coordinate along the whole boundary of (arc, s) pairs."""
    lengths = np.array([arc.length for arc in polygon.arcs])
    starts = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    arcs = np.asarray(arcs)
    params = np.asarray(params, dtype=float)
    out = np.empty(arcs.shape)
    for a, arc in enumerate(polygon.arcs):
        mask = arcs == a
        if mask.any():
            out[mask] = starts[a] + arc.length_at(params[mask])
    return out
