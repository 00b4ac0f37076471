"""
Quasi-uniform straight triangulations of curvilinear polygons.

Boundary vertices are arc samples at arc-length spacing close to the target
size; the interior comes from a jittered triangular lattice triangulated with
Triangle (constrained Delaunay), relaxed by Laplacian smoothing and repaired
around its worst triangles. Boundary edges remember the arc and parameter
interval they interpolate.
"""
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, NamedTuple, Optional

import numpy as np
import triangle
from scipy import sparse

from config import Config
from errors import MeshFormatError, MeshQualityError, PreconditionError
from geometry import closest_boundary_many, contains

logger = logging.getLogger(__name__)

ENDPOINT_TOL = 1e-10
GUARD_CLEARANCE = 0.6  # lattice points kept this many h away from corner guards
REPAIR_TARGET = 0.9  # repairs stop once the quality ratio is below this share of rho_max


class BoundaryEdge(NamedTuple):
    triangle: int
    local_edge: int
    arc: int
    s_a: float
    s_b: float


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Straight triangulation. Local edge e of a triangle joins its local
    vertices e and (e + 1) % 3; triangles are counterclockwise.
    """
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: tuple
    polygon: Optional[object] = field(default=None, repr=False)

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=float).reshape(-1, 2)
        triangles = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        vertices.flags.writeable = False
        triangles.flags.writeable = False
        object.__setattr__(self, 'vertices', vertices)
        object.__setattr__(self, 'triangles', triangles)
        object.__setattr__(self, 'boundary_edges', tuple(BoundaryEdge(*b) for b in self.boundary_edges))

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        return (np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.triangles, other.triangles)
                and self.boundary_edges == other.boundary_edges)

    __hash__ = None

    def __repr__(self):
        return f'<Mesh V={self.num_vertices} T={self.num_triangles} h={self.h:.4g}>'

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_triangles(self):
        return self.triangles.shape[0]

    @cached_property
    def signed_areas(self):
        p = self.vertices[self.triangles]
        e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def edge_lengths(self):
        p = self.vertices[self.triangles]
        return np.linalg.norm(np.roll(p, -1, axis=1) - p, axis=2)

    @property
    def diameters(self):
        return self.edge_lengths.max(axis=1)

    @property
    def inradii(self):
        return 2.0 * np.abs(self.signed_areas) / self.edge_lengths.sum(axis=1)

    @property
    def h(self):
        return float(self.diameters.max()) if self.num_triangles else 0.0

    @cached_property
    def _edge_structure(self):
        local = np.stack([self.triangles, np.roll(self.triangles, -1, axis=1)], axis=2)
        pairs = np.sort(local.reshape(-1, 2), axis=1)
        edges, inverse, counts = np.unique(pairs, axis=0, return_inverse=True, return_counts=True)
        return edges, inverse.reshape(-1, 3), counts

    @property
    def edges(self):
        """Unique edges as sorted vertex pairs."""
        return self._edge_structure[0]

    @property
    def triangle_edges(self):
        """Global edge index of each local edge."""
        return self._edge_structure[1]

    @property
    def edge_counts(self):
        return self._edge_structure[2]

    @cached_property
    def boundary_by_triangle(self):
        return {b.triangle: b for b in self.boundary_edges}


class Violation(NamedTuple):
    kind: str
    element: int
    message: str


@dataclass
class MeshReport:
    violations: List[Violation]
    min_angle: float
    quasi_uniformity: float
    h: float
    counts: dict

    @property
    def ok(self):
        return not self.violations

    def worst(self, kind=None):
        for v in self.violations:
            if kind is None or v.kind == kind:
                return v.element
        return None


def validate(mesh, rho_max=None, polygon=None):
    """Check every Mesh invariant; violations are reported, not raised."""
    rho_max = Config.RHO_MAX if rho_max is None else rho_max
    polygon = polygon if polygon is not None else mesh.polygon
    violations = []

    for t in np.flatnonzero(mesh.signed_areas <= 0.0):
        violations.append(Violation('orientation', int(t), 'non-positive signed area'))

    per_triangle = {}
    for b in mesh.boundary_edges:
        per_triangle[b.triangle] = per_triangle.get(b.triangle, 0) + 1
        if polygon is not None:
            tri = mesh.triangles[b.triangle]
            a, c = mesh.vertices[tri[b.local_edge]], mesh.vertices[tri[(b.local_edge + 1) % 3]]
            arc = polygon.arcs[b.arc]
            if (np.linalg.norm(a - arc.point(b.s_a)) > ENDPOINT_TOL
                    or np.linalg.norm(c - arc.point(b.s_b)) > ENDPOINT_TOL):
                violations.append(Violation('binding', b.triangle, f'edge not on arc {b.arc}'))
    for t, n in per_triangle.items():
        if n > 1:
            violations.append(Violation('boundary', int(t), f'{n} boundary edges on one triangle'))

    edges, tri_edges, counts = mesh.edges, mesh.triangle_edges, mesh.edge_counts
    declared = set()
    for b in mesh.boundary_edges:
        declared.add(int(tri_edges[b.triangle, b.local_edge]))
    for t in range(mesh.num_triangles):
        for e in range(3):
            g = int(tri_edges[t, e])
            if counts[g] > 2:
                violations.append(Violation('conformity', t, f'edge {tuple(edges[g])} shared by {counts[g]} triangles'))
            elif counts[g] == 1 and g not in declared:
                violations.append(Violation('conformity', t, f'dangling edge {tuple(edges[g])}'))
            elif counts[g] == 2 and g in declared:
                violations.append(Violation('conformity', t, f'boundary edge {tuple(edges[g])} has two triangles'))

    owners = {}
    for b in mesh.boundary_edges:
        tri = mesh.triangles[b.triangle]
        for v in (int(tri[b.local_edge]), int(tri[(b.local_edge + 1) % 3])):
            owners.setdefault(v, []).append(b)
    for v, incident in owners.items():
        if len(incident) == 2 and incident[0].arc != incident[1].arc:
            if incident[0].triangle == incident[1].triangle:
                violations.append(Violation('corner', incident[0].triangle, f'corner vertex {v} owned by one triangle'))

    inradii = mesh.inradii if mesh.num_triangles else np.array([1.0])
    ratio = mesh.h / float(inradii.min()) if mesh.num_triangles else 0.0
    if ratio > rho_max:
        violations.append(Violation('quality', int(np.argmin(inradii)), f'quasi-uniformity ratio {ratio:.3f} > {rho_max}'))

    counts_info = {
        'vertices': mesh.num_vertices,
        'triangles': mesh.num_triangles,
        'edges': int(len(edges)),
        'boundary_edges': len(mesh.boundary_edges),
    }
    counts_info['euler'] = counts_info['vertices'] - counts_info['edges'] + counts_info['triangles']
    return MeshReport(violations, _min_angle(mesh), ratio, mesh.h, counts_info)


def _min_angle(mesh):
    if not mesh.num_triangles:
        return 0.0
    p = mesh.vertices[mesh.triangles]
    angles = []
    for k in range(3):
        u = p[:, (k + 1) % 3] - p[:, k]
        w = p[:, (k + 2) % 3] - p[:, k]
        cos = np.sum(u * w, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(w, axis=1))
        angles.append(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0))))
    return float(np.min(angles))


def _boundary_points(polygon, h_target):
    min_segments = 3 if len(polygon.arcs) == 1 else 2
    points, segments = [], []
    for arc in polygon.arcs:
        n = max(int(math.ceil(arc.length / h_target - 1e-9)), min_segments)
        s = arc.param_at_length(np.linspace(0.0, arc.length, n + 1))
        s[0], s[-1] = 0.0, 1.0
        points.append(arc.point(s[:-1]))
        segments.extend((arc.id, float(a), float(b)) for a, b in zip(s[:-1], s[1:]))
    return np.concatenate(points), segments


def _lattice_points(polygon, h_target, rng, margin=0.5, guards=None):
    x0, y0, x1, y1 = polygon.bounding_box
    dy = h_target * math.sqrt(3.0) / 2.0
    rows = []
    for j, y in enumerate(np.arange(y0, y1 + dy, dy)):
        xs = np.arange(x0 + (0.5 * h_target if j % 2 else 0.0), x1 + h_target, h_target)
        rows.append(np.column_stack([xs, np.full_like(xs, y)]))
    pts = np.concatenate(rows)
    pts = pts + rng.uniform(-0.1 * h_target, 0.1 * h_target, size=pts.shape)
    pts = pts[contains(polygon, pts)]
    if not len(pts):
        return pts
    dist = closest_boundary_many(polygon, pts)[2]
    pts = pts[dist >= margin * h_target]
    if guards is not None and len(guards) and len(pts):
        gap = np.linalg.norm(pts[:, None, :] - guards[None, :, :], axis=2).min(axis=1)
        pts = pts[gap >= GUARD_CLEARANCE * h_target]
    return pts


def _corner_guards(polygon, h_target):
    """One interior point on each corner bisector, so no triangle spans both corner edges."""
    guards = []
    for corner in polygon.corners:
        t_in = polygon.arcs[corner.arc_in].tangent(1.0)
        t_out = polygon.arcs[corner.arc_out].tangent(0.0)
        bisector = t_out - t_in
        norm = np.linalg.norm(bisector)
        if norm < 1e-12:
            continue
        guard = corner.point + 0.5 * h_target * bisector / norm
        if contains(polygon, guard):
            guards.append(guard)
    return np.array(guards).reshape(-1, 2)


def _triangulate(points, segments):
    # p: constrained Delaunay of the PSLG, Y: no Steiner points on the boundary, Q: quiet
    result = triangle.triangulate({'vertices': points, 'segments': segments}, 'pYQ')
    vertices = np.array(result['vertices'], dtype=float)
    triangles = np.array(result['triangles'], dtype=np.int64)
    vertices[:len(points)] = points
    flipped = _signed_areas(vertices, triangles) < 0.0
    triangles[flipped] = triangles[flipped][:, [0, 2, 1]]
    return vertices, triangles


def _compact(vertices, triangles, nb):
    """Drop vertices no triangle references (duplicates Triangle skipped); boundary ids stay put."""
    used = np.zeros(len(vertices), dtype=bool)
    used[triangles.ravel()] = True
    used[:nb] = True
    remap = np.cumsum(used) - 1
    return vertices[used], remap[triangles]


def _find_ears(triangles, boundary_pairs):
    ears = []
    for t, tri in enumerate(triangles):
        owned = [e for e in range(3) if frozenset((tri[e], tri[(e + 1) % 3])) in boundary_pairs]
        if len(owned) >= 2:
            ears.append((t, next(e for e in range(3) if e not in owned)))
    return ears


def _split_ears(vertices, triangles, boundary_pairs):
    """Split the interior edge of every triangle owning two boundary edges at its midpoint.

    The ear (a, b, c) with boundary edges ab and bc becomes (a, b, m), (b, c, m); the
    neighbour across ca is split through m as well, so the mesh stays conforming.
    """
    vertices = [np.asarray(v, dtype=float) for v in vertices]
    triangles = [tuple(int(i) for i in tri) for tri in triangles]
    while True:
        ears = _find_ears(triangles, boundary_pairs)
        if not ears:
            break
        directed = {(tri[k], tri[(k + 1) % 3]): u for u, tri in enumerate(triangles) for k in range(3)}
        touched = set()
        for t, e in ears:
            tri = triangles[t]
            c, a = tri[e], tri[(e + 1) % 3]
            b = tri[(e + 2) % 3]
            u = directed.get((a, c))
            if t in touched or u in touched:
                continue
            m = len(vertices)
            vertices.append(0.5 * (vertices[a] + vertices[c]))
            triangles[t] = (a, b, m)
            triangles.append((b, c, m))
            touched.add(t)
            if u is not None:
                other = triangles[u]
                k = next(k for k in range(3) if other[k] == a and other[(k + 1) % 3] == c)
                x = other[(k + 2) % 3]
                triangles[u] = (a, m, x)
                triangles.append((m, c, x))
                touched.add(u)
        if not touched:
            break
    return np.array(vertices), np.array(triangles, dtype=np.int64)


def _signed_areas(vertices, triangles):
    p = vertices[triangles]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    return e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]


def _smooth(vertices, triangles, fixed, sweeps):
    n = len(vertices)
    i = np.concatenate([triangles[:, 0], triangles[:, 1], triangles[:, 2]])
    j = np.concatenate([triangles[:, 1], triangles[:, 2], triangles[:, 0]])
    adj = sparse.coo_matrix((np.ones(len(i)), (i, j)), shape=(n, n)).tocsr()
    adj = ((adj + adj.T) > 0).astype(float)
    degree = np.asarray(adj.sum(axis=1)).ravel()
    movable = degree > 0
    movable[fixed] = False
    degree[degree == 0] = 1.0
    for sweep in range(sweeps):
        old = vertices.copy()
        target = (adj @ vertices) / degree[:, None]
        vertices[movable] = target[movable]
        for _ in range(n):
            bad = _signed_areas(vertices, triangles) <= 0.0
            if not bad.any():
                break
            back = np.unique(triangles[bad])
            logger.warning('Smoothing sweep %d reverted %d vertices', sweep, len(back))
            vertices[back] = old[back]
    return vertices


def _quality(vertices, triangles):
    """Mesh diameter over inradius, per triangle."""
    p = vertices[triangles]
    lengths = np.linalg.norm(np.roll(p, -1, axis=1) - p, axis=2)
    inradii = np.abs(_signed_areas(vertices, triangles)) / lengths.sum(axis=1)
    with np.errstate(divide='ignore'):
        return lengths.max() / inradii


def _build(bpoints, interior, segments, boundary_pairs, sweeps):
    nb = len(bpoints)
    vertices, triangles = _triangulate(np.concatenate([bpoints, interior.reshape(-1, 2)]), segments)
    vertices, triangles = _compact(vertices, triangles, nb)
    vertices, triangles = _split_ears(vertices, triangles, boundary_pairs)
    vertices = _smooth(vertices, triangles, np.arange(nb), sweeps)
    return vertices, triangles


def _repair_candidates(polygon, vertices, triangles, t, nb):
    """Interior point sets with the vertices of triangle t removed, merged or re-placed."""
    tri = [int(i) for i in triangles[t]]
    interior = vertices[nb:]
    out = [np.delete(interior, v - nb, axis=0) for v in tri if v >= nb]
    for k in range(3):
        u, v = tri[k], tri[(k + 1) % 3]
        if u >= nb and v >= nb:
            merged = interior.copy()
            merged[u - nb] = 0.5 * (vertices[u] + vertices[v])
            out.append(np.delete(merged, v - nb, axis=0))

    # apex opposite the longest edge moved to the equilateral position
    p = vertices[tri]
    k = int(np.argmax(np.linalg.norm(np.roll(p, -1, axis=0) - p, axis=1)))
    u, v, apex = tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]
    base = vertices[v] - vertices[u]
    placed = 0.5 * (vertices[u] + vertices[v]) + 0.5 * math.sqrt(3.0) * np.array([-base[1], base[0]])
    if apex >= nb and contains(polygon, placed):
        moved = interior.copy()
        moved[apex - nb] = placed
        out.append(moved)
    else:
        out.append(np.vstack([interior, p.mean(axis=0)]))
    return out


def _repair(polygon, bpoints, vertices, triangles, segments, boundary_pairs, sweeps, target, limit):
    """Local retriangulation around the worst triangle until the quality ratio drops to target.

    Only candidates that lower the worst ratio of the whole mesh are accepted.
    """
    nb = len(bpoints)
    quality = _quality(vertices, triangles)
    for attempt in range(limit):
        worst = float(quality.max())
        if worst <= target:
            break
        t = int(np.argmax(quality))
        best = None
        for interior in _repair_candidates(polygon, vertices, triangles, t, nb):
            trial = _build(bpoints, interior, segments, boundary_pairs, sweeps)
            trial_quality = _quality(*trial)
            if trial_quality.max() < (worst if best is None else best[2].max()):
                best = trial + (trial_quality,)
        if best is None:
            logger.warning('Mesh repair stalled at ratio %.3f (triangle %d)', worst, t)
            break
        vertices, triangles, quality = best
        logger.debug('Mesh repair %d: ratio %.3f -> %.3f', attempt, worst, float(quality.max()))
    return vertices, triangles


def generate(polygon, h_target, seed=None, rho_max=None, sweeps=None, rounds=None):
    """Quasi-uniform straight mesh of the polygon with boundary edges bound to arcs.

    Each round triangulates boundary points plus the current interior points, splits
    ears and smooths the interior; the next round re-triangulates the smoothed points.
    A repair loop then works on the worst triangles until the quality ratio settles.
    """
    seed = Config.SEED if seed is None else seed
    rho_max = Config.RHO_MAX if rho_max is None else rho_max
    sweeps = Config.SMOOTHING_SWEEPS if sweeps is None else sweeps
    rounds = Config.MESH_ROUNDS if rounds is None else rounds
    if not 0.0 < h_target < 0.5 * polygon.diameter:
        raise PreconditionError(
            f'h_target {h_target} must be positive and below half the domain diameter {polygon.diameter:.4g}')

    rng = np.random.default_rng(seed)
    bpoints, bsegments = _boundary_points(polygon, h_target)
    nb = len(bpoints)
    segments = np.column_stack([np.arange(nb), (np.arange(nb) + 1) % nb])
    boundary_pairs = {frozenset((int(a), int(b))) for a, b in segments}
    guards = _corner_guards(polygon, h_target)
    interior = np.concatenate([guards, _lattice_points(polygon, h_target, rng, guards=guards)])

    for _ in range(max(rounds, 1)):
        vertices, triangles = _build(bpoints, interior, segments, boundary_pairs, sweeps)
        interior = vertices[nb:]
    vertices, triangles = _repair(polygon, bpoints, vertices, triangles, segments, boundary_pairs, sweeps,
                                  REPAIR_TARGET * rho_max, Config.MESH_REPAIRS)

    directed = {}
    for t, tri in enumerate(triangles):
        for e in range(3):
            directed[(int(tri[e]), int(tri[(e + 1) % 3]))] = (t, e)
    boundary_edges = []
    for k, (arc_id, s_a, s_b) in enumerate(bsegments):
        key = (k, (k + 1) % nb)
        if key not in directed:
            raise MeshQualityError(f'boundary segment {key} missing from triangulation', triangle=None)
        t, e = directed[key]
        boundary_edges.append(BoundaryEdge(t, e, arc_id, s_a, s_b))

    mesh = Mesh(vertices, triangles, tuple(boundary_edges), polygon=polygon)
    report = validate(mesh, rho_max=rho_max, polygon=polygon)
    if not report.ok:
        v = report.violations[0]
        raise MeshQualityError(f'{v.kind}: {v.message}', triangle=report.worst('quality') or v.element)
    if not 0.5 * h_target <= mesh.h <= 2.0 * h_target:
        raise MeshQualityError(f'mesh size {mesh.h:.4g} outside [{0.5 * h_target:.4g}, {2 * h_target:.4g}]',
                               triangle=int(np.argmax(mesh.diameters)))
    logger.info('Generated mesh for %s: V=%d T=%d h=%.4g ratio=%.3f',
                getattr(polygon, 'name', 'polygon'), mesh.num_vertices, mesh.num_triangles,
                mesh.h, report.quasi_uniformity)
    return mesh


def write_mesh(mesh, path):
    """Write the meshv1 text format with 17 significant digits."""
    lines = [f'meshv1 {mesh.num_vertices} {mesh.num_triangles} {len(mesh.boundary_edges)}']
    lines.extend(f'{x:.17g} {y:.17g}' for x, y in mesh.vertices)
    lines.extend(f'{i} {j} {k}' for i, j, k in mesh.triangles)
    lines.extend(f'{b.triangle} {b.local_edge} {b.arc} {b.s_a:.17g} {b.s_b:.17g}' for b in mesh.boundary_edges)
    with open(path, 'w', encoding='utf-8') as f:
        f.write('\n'.join(lines) + '\n')


def read_mesh(path, polygon=None):
    """Read the meshv1 text format; malformed content raises MeshFormatError with its line number."""
    with open(path, 'r', encoding='utf-8') as f:
        lines = f.read().splitlines()
    if not lines or not lines[0].strip():
        raise MeshFormatError('missing header', 1)
    header = lines[0].split()
    if len(header) != 4 or header[0] != 'meshv1':
        raise MeshFormatError('missing header', 1)
    try:
        nv, nt, nb = (int(x) for x in header[1:])
    except ValueError:
        raise MeshFormatError('header counts must be integers', 1)

    def rows(start, count, width, convert, what):
        out = []
        for offset in range(count):
            lineno = start + offset + 1
            if start + offset >= len(lines):
                raise MeshFormatError(f'unexpected end of file, expected {what}', lineno)
            parts = lines[start + offset].split()
            if len(parts) != width:
                raise MeshFormatError(f'{what} line needs {width} values, got {len(parts)}', lineno)
            try:
                out.append([c(p) for c, p in zip(convert, parts)])
            except ValueError:
                raise MeshFormatError(f'malformed {what} line', lineno)
        return out

    vertices = rows(1, nv, 2, (float, float), 'vertex')
    triangles = rows(1 + nv, nt, 3, (int, int, int), 'triangle')
    boundary = rows(1 + nv + nt, nb, 5, (int, int, int, float, float), 'boundary')
    for k, tri in enumerate(triangles):
        if min(tri) < 0 or max(tri) >= nv:
            raise MeshFormatError(f'triangle references a missing vertex {tri}', 1 + nv + k + 1)
    end = 1 + nv + nt + nb
    for lineno, line in enumerate(lines[end:], start=end + 1):
        if line.strip():
            raise MeshFormatError('content after the declared counts', lineno)
    return Mesh(np.array(vertices, dtype=float).reshape(-1, 2),
                np.array(triangles, dtype=np.int64).reshape(-1, 3),
                tuple(BoundaryEdge(*b) for b in boundary), polygon=polygon)
