"""
Outward flow of a curvilinear polygon.

The field is X(x) = eta(d(x)) V(x): d is the signed boundary distance, eta a
C2 cutoff equal to 1 around the boundary, and V the outward normal mollified
along the boundary in arc length and read at the closest boundary point.
Its flow Psi_t enlarges the domain; verify_sandwich measures how far boundary
points travel compared with t.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy import ndimage

from config import Config
from errors import ConstructionError, PreconditionError
from geometry import boundary_position, boundary_samples, signed_distance

logger = logging.getLogger(__name__)

TABLE_SAMPLES = 4096
CHECK_SAMPLES = 512
JACOBIAN_STEP = 1e-6
MIN_OUTWARD = 0.2
FLOW_TIME_TOL = 1e-12


def smoothstep(t):
    """C2 quintic ramp from 0 at t <= 0 to 1 at t >= 1."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)


class OutwardField:
    """Compactly supported outward vector field with |X| <= 1."""

    def __init__(self, polygon, width, cutoff, samples=TABLE_SAMPLES):
        self.polygon = polygon
        self.width = float(width)
        self.cutoff = float(cutoff)
        table = boundary_samples(polygon, samples)
        self._perimeter = float(sum(arc.length for arc in polygon.arcs))
        self._spacing = self._perimeter / samples
        half = int(self.width / self._spacing)
        offsets = np.arange(-half, half + 1) * self._spacing / self.width
        kernel = (1.0 - offsets ** 2) ** 2
        blended = ndimage.convolve1d(table.normals, kernel, axis=0, mode='wrap')
        self._table = blended / np.linalg.norm(blended, axis=1, keepdims=True)
        self._boundary = table

    def __repr__(self):
        return f'<OutwardField w={self.width:.4g} w0={self.cutoff:.4g}>'

    def cutoff_profile(self, d):
        """eta: 0 for d <= -w0 or d >= w, 1 on [-w0/2, w/2]."""
        d = np.asarray(d, dtype=float)
        outer = 1.0 - smoothstep((d - 0.5 * self.width) / (0.5 * self.width))
        inner = 1.0 - smoothstep((-d - 0.5 * self.cutoff) / (0.5 * self.cutoff))
        return np.where(d >= 0.0, outer, inner)

    def direction_at(self, positions):
        """Mollified unit normal at arc-length positions along the boundary."""
        u = np.mod(positions, self._perimeter) / self._spacing
        i0 = np.floor(u).astype(int) % len(self._table)
        i1 = (i0 + 1) % len(self._table)
        frac = (u - np.floor(u))[:, None]
        v = (1.0 - frac) * self._table[i0] + frac * self._table[i1]
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    def __call__(self, x):
        X = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.zeros_like(X)
        d, arcs, params = signed_distance(self.polygon, X)
        eta = self.cutoff_profile(d)
        active = eta > 0.0
        if active.any():
            positions = boundary_position(self.polygon, arcs[active], params[active])
            out[active] = eta[active, None] * self.direction_at(positions)
        return out[0] if np.ndim(x) == 1 else out

    def outward_constant(self, n=CHECK_SAMPLES):
        """min over boundary samples y of <X(y), N_y>."""
        samples = boundary_samples(self.polygon, n)
        return float(np.min(np.sum(self(samples.points) * samples.normals, axis=1)))


def _min_corner_distance(polygon):
    corners = np.array([c.point for c in polygon.corners])
    if len(corners) < 2:
        return math.inf
    diff = corners[:, None, :] - corners[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    return float(dist[~np.eye(len(corners), dtype=bool)].min())


def build_field(polygon, width=None, cutoff=None, samples=TABLE_SAMPLES):
    """Outward field with collar width w and inner cutoff w0 (defaults scale with the inradius)."""
    inradius = polygon.inradius
    width = Config.FLOW_COLLAR * inradius if width is None else width
    cutoff = Config.FLOW_CUTOFF * inradius if cutoff is None else cutoff
    if not 0.0 < cutoff < width:
        raise ConstructionError(f'need 0 < w0 < w, got w0={cutoff} w={width}')
    reach = 0.25 * _min_corner_distance(polygon)
    if width > reach:
        raise ConstructionError(f'collar width {width:.4g} exceeds a quarter of the corner spacing ({reach:.4g})')
    for junction in polygon.junctions:
        if junction.is_corner and junction.angle >= math.pi - 1e-6:
            raise ConstructionError(f'corner opening {junction.angle:.6f} is not below pi')

    field_ = OutwardField(polygon, width, cutoff, samples)
    c = field_.outward_constant()
    if c < MIN_OUTWARD:
        raise ConstructionError(f'mollified field is not outward enough (min <X, N> = {c:.3e} < {MIN_OUTWARD})')
    logger.info('Built outward field for %s: w=%.4g w0=%.4g c=%.4f',
                getattr(polygon, 'name', 'polygon'), width, cutoff, c)
    return field_


def flow(field_, t, x0, steps=None):
    """Psi_t(x0) by classical fourth-order Runge-Kutta with uniform steps."""
    steps = Config.FLOW_STEPS if steps is None else steps
    x = np.array(x0, dtype=float)
    if t == 0.0:
        return x
    if t < 0.0:
        raise PreconditionError(f'flow time must be non-negative, got {t}')
    if t > Config.FLOW_DELTA + FLOW_TIME_TOL:
        raise PreconditionError(f'flow time {t} exceeds the collar time limit {Config.FLOW_DELTA}')
    dt = t / steps
    for _ in range(steps):
        k1 = field_(x)
        k2 = field_(x + 0.5 * dt * k1)
        k3 = field_(x + 0.5 * dt * k2)
        k4 = field_(x + dt * k3)
        x = x + (dt / 6.0) * (k1 + 2.0 * (k2 + k3) + k4)
    return x


def flow_jacobian_det(field_, t, points, step=JACOBIAN_STEP, steps=None):
    """det grad Psi_t by central differences."""
    points = np.atleast_2d(points)
    n = len(points)
    ex, ey = np.array([step, 0.0]), np.array([0.0, step])
    moved = flow(field_, t, np.vstack([points + ex, points - ex, points + ey, points - ey]), steps)
    dx = (moved[:n] - moved[n:2 * n]) / (2.0 * step)
    dy = (moved[2 * n:3 * n] - moved[3 * n:]) / (2.0 * step)
    return dx[:, 0] * dy[:, 1] - dx[:, 1] * dy[:, 0]


def _escape_distance(polygon, points):
    return np.maximum(signed_distance(polygon, points)[0], 0.0)


@dataclass
class SandwichReport:
    rows: List[dict] = field(default_factory=list)
    lam: float = math.nan
    min_det: float = math.nan
    outward_constant: float = math.nan

    @property
    def ok(self):
        return self.lam >= MIN_OUTWARD and self.min_det > 0.0


def verify_sandwich(field_, ts, n=CHECK_SAMPLES, steps=None):
    """
    Escape distances of n boundary samples under Psi_t for each t.
    lam = min over t > 0 and samples of min(dist / t, t / dist).
    """
    ys = boundary_samples(field_.polygon, n).points
    report = SandwichReport(outward_constant=field_.outward_constant(n))
    lam, min_det = math.inf, math.inf
    for t in ts:
        if t == 0.0:
            report.rows.append({'t': 0.0, 'min_dist': 0.0, 'max_dist': 0.0,
                                'lam': math.nan, 'min_det': 1.0})
            continue
        dist = _escape_distance(field_.polygon, flow(field_, t, ys, steps))
        ratios = dist / t
        with np.errstate(divide='ignore'):
            row_lam = float(np.min(np.minimum(ratios, 1.0 / ratios)))
        det = float(flow_jacobian_det(field_, t, ys, steps=steps).min())
        report.rows.append({'t': float(t), 'min_dist': float(dist.min()), 'max_dist': float(dist.max()),
                            'lam': row_lam, 'min_det': det})
        lam, min_det = min(lam, row_lam), min(min_det, det)
        logger.info('Sandwich t=%.4g: dist in [%.4g, %.4g], lam=%.4f, min det=%.4f',
                    t, dist.min(), dist.max(), row_lam, det)
    report.lam = lam if lam < math.inf else math.nan
    report.min_det = min_det if min_det < math.inf else math.nan
    return report


def collar_points(field_, n, rng):
    """Random points within the support collar around the boundary."""
    samples = boundary_samples(field_.polygon, max(n, 16))
    pick = rng.integers(0, len(samples.points), size=n)
    offsets = rng.uniform(-field_.cutoff, field_.width, size=n)
    return samples.points[pick] + offsets[:, None] * samples.normals[pick]


def semigroup_defect(field_, t, points, steps=None):
    """max |Psi_{t/2}(Psi_{t/2}(x)) - Psi_t(x)|."""
    half = flow(field_, 0.5 * t, flow(field_, 0.5 * t, points, steps), steps)
    return float(np.max(np.linalg.norm(half - flow(field_, t, points, steps), axis=-1)))


def escape_is_monotone(field_, ts, n=CHECK_SAMPLES, steps=None, tol=1e-12):
    """Whether dist(Psi_t(y), Omega) is nondecreasing in t for boundary samples y."""
    ys = boundary_samples(field_.polygon, n).points
    previous = np.zeros(len(ys))
    for t in sorted(ts):
        current = _escape_distance(field_.polygon, flow(field_, t, ys, steps))
        if np.any(current < previous - tol):
            return False
        previous = current
    return True
