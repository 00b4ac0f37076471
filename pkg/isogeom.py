"""
Isoparametric geometry layer.

Reference triangle vertices are (0, 0), (1, 0), (0, 1) with barycentric
coordinates lambda = (1 - x - y, x, y). A boundary element's curved edge is
local edge e, joining local vertices e and e + 1. The exact map blends the arc
against the degree-r interpolant of the arc on that edge:

    F(lambda) = G(lambda) + (la + lb)**m * [gamma(s(theta)) - P_r(theta)]

with theta = lb / (la + lb), P_r the interpolant of gamma at theta = j / r and
G the affine map lifted by the curved-edge node displacements. For r = 1,
P_1 is the chord, G the affine map and m = 1. For r >= 2 the weight power is
m = r + 1, which keeps the derivatives of F up to order r + 1 bounded near the
vertex opposite the curved edge. The degree-r map F_K interpolates F at
the Lagrange nodes.
"""
import csv
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import List

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import stats

from config import Config
from errors import DomainError, ElevationError, GeometryError, InversionError, PreconditionError
from geometry import closest_boundary_many

logger = logging.getLogger(__name__)

REFERENCE_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
# d(lambda_k)/d(x, y)
BARYCENTRIC_GRADIENTS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
BARYCENTRIC_TOL = 1e-12
BLEND_TOL = 1e-14
INSIDE_TOL = 1e-10
SAMPLE_ORDER = 9  # 10 points per reference edge
EDGE_SAMPLES = 33


@lru_cache(maxsize=None)
def _collapsed_gauss(degree):
    n = (degree + 3) // 2
    x, w = leggauss(n)
    u, wu = 0.5 * (x + 1.0), 0.5 * w
    U, V = np.meshgrid(u, u, indexing='ij')
    WU, WV = np.meshgrid(wu, wu, indexing='ij')
    points = np.column_stack([U.ravel(), (V * (1.0 - U)).ravel()])
    weights = (WU * WV * (1.0 - U)).ravel()
    points.flags.writeable = False
    weights.flags.writeable = False
    return points, weights


def quadrature(degree):
    """Collapsed Gauss rule on the reference triangle, exact for polynomials of the given degree."""
    return _collapsed_gauss(int(degree))


def barycentric(points):
    points = np.asarray(points, dtype=float)
    return np.stack([1.0 - points[..., 0] - points[..., 1], points[..., 0], points[..., 1]], axis=-1)


def lattice(order):
    """Principal lattice of the given order on the reference triangle."""
    return np.array([(i / order, j / order) for j in range(order + 1) for i in range(order + 1 - j)])


def edge_points(local_edge, n):
    """n equally spaced reference points on local edge e, from vertex e to vertex e + 1."""
    a, b = REFERENCE_VERTICES[local_edge], REFERENCE_VERTICES[(local_edge + 1) % 3]
    tau = np.linspace(0.0, 1.0, n)[:, None]
    return a + tau * (b - a)


def lagrange_1d(theta, degree):
    """Equispaced 1D Lagrange basis on [0, 1] and its derivative at theta."""
    theta = np.asarray(theta, dtype=float)
    t = np.linspace(0.0, 1.0, degree + 1)
    values = np.ones(theta.shape + (degree + 1,))
    derivs = np.zeros(theta.shape + (degree + 1,))
    for j in range(degree + 1):
        others = [k for k in range(degree + 1) if k != j]
        for k in others:
            values[..., j] *= (theta - t[k]) / (t[j] - t[k])
        for m in others:
            term = np.full(theta.shape, 1.0 / (t[j] - t[m]))
            for k in others:
                if k != m:
                    term = term * (theta - t[k]) / (t[j] - t[k])
            derivs[..., j] += term
    return values, derivs


class ReferenceElement:
    """
    Degree-r Lagrange element on the reference triangle.

    Local node order: the three vertices, then the r - 1 nodes of each local
    edge e running from vertex e to vertex e + 1, then the interior node (r = 3).
    """

    def __init__(self, degree, quadrature_degree=None):
        if degree not in (1, 2, 3):
            raise PreconditionError(f'degree must be 1, 2 or 3, got {degree}')
        self.degree = degree
        self.quadrature_degree = 2 * degree + 2 if quadrature_degree is None else int(quadrature_degree)
        if self.quadrature_degree < 2 * degree + 2:
            raise PreconditionError(f'quadrature degree must be at least {2 * degree + 2}')

        nodes = [tuple(v) for v in REFERENCE_VERTICES]
        edge_dofs = []
        for e in range(3):
            a, b = REFERENCE_VERTICES[e], REFERENCE_VERTICES[(e + 1) % 3]
            inner = []
            for j in range(1, degree):
                inner.append(len(nodes))
                nodes.append(tuple(a + (j / degree) * (b - a)))
            edge_dofs.append((e, *inner, (e + 1) % 3))
        self.interior_dofs = ()
        if degree == 3:
            self.interior_dofs = (len(nodes),)
            nodes.append((1.0 / 3.0, 1.0 / 3.0))
        self.nodes = np.array(nodes)
        self.edge_dofs = tuple(edge_dofs)
        self.num_dofs = len(nodes)

        self._exponents = [(a, total - a) for total in range(degree + 1) for a in range(total, -1, -1)]
        self._coeffs = np.linalg.inv(self._monomials(self.nodes))
        self.quad_points, self.quad_weights = quadrature(self.quadrature_degree)

    def __repr__(self):
        return f'<ReferenceElement P{self.degree} dofs={self.num_dofs} quad={len(self.quad_weights)}>'

    def _monomials(self, points):
        x, y = points[:, 0:1], points[:, 1:2]
        return np.hstack([x ** a * y ** b for a, b in self._exponents])

    def _monomial_gradients(self, points):
        x, y = points[:, 0:1], points[:, 1:2]
        dx = np.hstack([a * x ** max(a - 1, 0) * y ** b for a, b in self._exponents])
        dy = np.hstack([b * x ** a * y ** max(b - 1, 0) for a, b in self._exponents])
        return np.stack([dx, dy], axis=-1)

    def basis(self, points):
        """Basis values, shape (n, num_dofs)."""
        return self._monomials(np.atleast_2d(np.asarray(points, dtype=float))) @ self._coeffs

    def gradients(self, points):
        """Basis gradients, shape (n, num_dofs, 2)."""
        g = self._monomial_gradients(np.atleast_2d(np.asarray(points, dtype=float)))
        return np.einsum('nmd,mi->nid', g, self._coeffs)

    def evaluate(self, coefficients, points):
        return self.basis(points) @ np.asarray(coefficients)

    def evaluation_points(self):
        """Principal lattice of order r + 3 plus the quadrature points."""
        return np.vstack([lattice(self.degree + 3), self.quad_points])


@lru_cache(maxsize=None)
def reference_element(degree, quadrature_degree=None):
    return ReferenceElement(degree, quadrature_degree)


def _as_points(points):
    points = np.asarray(points, dtype=float)
    return np.atleast_2d(points), points.ndim == 1


def _check_reference(points):
    if np.any(barycentric(points) < -BARYCENTRIC_TOL):
        raise DomainError('point outside the closed reference triangle')


class ElementGeometry:
    """Maps of one mesh triangle: affine, exact blended, degree-r isoparametric and Phi_h."""

    def __init__(self, element_id, vertices, ref, arc=None, local_edge=None, s_a=None, s_b=None):
        self.id = int(element_id)
        self.ref = ref
        self.vertices = np.asarray(vertices, dtype=float)
        self.matrix = np.column_stack([self.vertices[1] - self.vertices[0], self.vertices[2] - self.vertices[0]])
        self.offset = self.vertices[0].copy()
        self.arc = arc
        if arc is None:
            self.kind = 'interior'
            self.nodes = self.affine(ref.nodes)
            return

        self.kind = 'boundary'
        self.local_edge = int(local_edge)
        self.s_a, self.s_b = float(s_a), float(s_b)
        r = ref.degree
        self.blend_power = 1 if r == 1 else r + 1
        va, vb = self.vertices[self.local_edge], self.vertices[(self.local_edge + 1) % 3]
        t = np.linspace(0.0, 1.0, r + 1)
        points = np.array(arc.point(self.s_a + (self.s_b - self.s_a) * t)).reshape(-1, 2)
        points[0], points[-1] = va, vb
        self.edge_points = points
        dofs = ref.edge_dofs[self.local_edge]
        self._lift_dofs = list(dofs[1:-1])
        self._lift = points[1:-1] - (va + t[1:-1, None] * (vb - va))
        self.nodes = self._blend(ref.nodes)[0]
        self.nodes[list(dofs)] = points

    def __repr__(self):
        return f'<ElementGeometry {self.id} {self.kind}>'

    @property
    def is_boundary(self):
        return self.kind == 'boundary'

    @property
    def diameter(self):
        return float(np.max(np.linalg.norm(np.roll(self.vertices, -1, axis=0) - self.vertices, axis=1)))

    def affine(self, points):
        return np.atleast_2d(points) @ self.matrix.T + self.offset

    def _blend(self, P, gradient=False):
        base = self.affine(P)
        jac = np.broadcast_to(self.matrix, (len(P), 2, 2)).copy() if gradient else None
        if self.arc is None:
            return base, jac

        a, b = self.local_edge, (self.local_edge + 1) % 3
        lam = barycentric(P)
        sigma = lam[:, a] + lam[:, b]
        blend = sigma >= BLEND_TOL
        theta = np.where(blend, lam[:, b] / np.where(blend, sigma, 1.0), 0.5)
        ds = self.s_b - self.s_a
        s = np.clip(self.s_a + ds * theta, 0.0, 1.0)
        ell, dell = lagrange_1d(theta, self.ref.degree)
        delta = np.asarray(self.arc.point(s)).reshape(-1, 2) - ell @ self.edge_points
        m = self.blend_power
        weight = np.where(blend, sigma, 0.0) ** m
        value = base + weight[:, None] * delta
        if self._lift_dofs:
            value += self.ref.basis(P)[:, self._lift_dofs] @ self._lift
        if not gradient:
            return value, None

        ddelta = np.asarray(self.arc.tangent(s)).reshape(-1, 2) * ds - dell @ self.edge_points
        grad_sigma = BARYCENTRIC_GRADIENTS[a] + BARYCENTRIC_GRADIENTS[b]
        grad_theta = BARYCENTRIC_GRADIENTS[b][None, :] - theta[:, None] * grad_sigma[None, :]
        # grad_theta above is sigma times the gradient of theta
        dweight = np.where(blend, np.where(blend, sigma, 1.0) ** (m - 1), 0.0)
        jac += dweight[:, None, None] * (
            m * delta[:, :, None] * grad_sigma[None, None, :] + ddelta[:, :, None] * grad_theta[:, None, :])
        if self._lift_dofs:
            grads = self.ref.gradients(P)[:, self._lift_dofs, :]
            jac += np.einsum('jd,njk->ndk', self._lift, grads)
        return value, jac

    def exact_map(self, points):
        """Blended exact map F at reference points."""
        P, single = _as_points(points)
        _check_reference(P)
        value = self._blend(P)[0]
        return value[0] if single else value

    def exact_jacobian(self, points):
        P, single = _as_points(points)
        _check_reference(P)
        jac = self._blend(P, gradient=True)[1]
        return jac[0] if single else jac

    def map(self, points):
        """Isoparametric map F_K."""
        P, single = _as_points(points)
        if self.arc is None:
            value = self.affine(P)
        else:
            value = self.ref.basis(P) @ self.nodes
        return value[0] if single else value

    def jacobian(self, points):
        P, single = _as_points(points)
        if self.arc is None:
            jac = np.broadcast_to(self.matrix, (len(P), 2, 2)).copy()
        else:
            jac = np.einsum('id,nik->ndk', self.nodes, self.ref.gradients(P))
        return jac[0] if single else jac

    def inverse(self, x, strict=True, tol=None, max_iter=None):
        """Reference preimage under F_K; strict mode rejects points outside K."""
        X, single = _as_points(x)
        if self.arc is None:
            P = np.linalg.solve(self.matrix, (X - self.offset).T).T
        else:
            P, converged = invert_points(self.ref, self.nodes, X, tol=tol, max_iter=max_iter)
            if not converged.all():
                bad = int(np.flatnonzero(~converged)[0])
                raise InversionError('Newton iteration did not converge', element=self.id, point=tuple(X[bad]))
        if strict and np.any(barycentric(P) < -INSIDE_TOL):
            raise DomainError(f'point outside element {self.id}')
        return P[0] if single else P

    def phi(self, x):
        """Phi_h = F o F_K^-1; the identity on interior elements."""
        X, single = _as_points(x)
        if self.arc is None:
            value = X.copy()
        else:
            value = self._blend(_clip_reference(self.inverse(X)))[0]
        return value[0] if single else value

    def phi_jacobian(self, x):
        X, single = _as_points(x)
        if self.arc is None:
            jac = np.broadcast_to(np.eye(2), (len(X), 2, 2)).copy()
        else:
            P = _clip_reference(self.inverse(X))
            jac = self._blend(P, gradient=True)[1] @ np.linalg.inv(self.jacobian(P))
        return jac[0] if single else jac

    def phi_gradient_at(self, P):
        """Gradient of Phi_h at F_K(P) for reference points P, without inversion."""
        if self.arc is None:
            return np.broadcast_to(np.eye(2), (len(P), 2, 2)).copy()
        return self._blend(P, gradient=True)[1] @ np.linalg.inv(self.jacobian(P))

    def coefficient_matrix(self, points):
        """A_h = grad Phi grad Phi^T / det grad Phi at the physical point F(x_hat)."""
        P, single = _as_points(points)
        _check_reference(P)
        if self.arc is None:
            A = np.broadcast_to(np.eye(2), (len(P), 2, 2)).copy()
        else:
            G = self.phi_gradient_at(P)
            J = np.linalg.det(G)
            if np.any(J <= 0.0):
                raise GeometryError(f'element {self.id}: non-positive Jacobian of Phi_h ({J.min():.3e})')
            A = G @ np.transpose(G, (0, 2, 1)) / J[:, None, None]
        return A[0] if single else A


def _clip_reference(P):
    P = np.clip(P, 0.0, 1.0)
    excess = P.sum(axis=1) - 1.0
    over = excess > 0.0
    P[over] -= 0.5 * excess[over, None]
    return P


def invert_points(ref, nodes, x, tol=None, max_iter=None, start=None):
    """
    Damped Newton inversion of F_K = sum_i nodes_i N_i.

    nodes is (num_dofs, 2) for one element or (n, num_dofs, 2) per point.
    Returns the reference points and a convergence mask; points outside the
    element converge to their polynomial preimage when one exists.
    """
    tol = Config.NEWTON_TOL if tol is None else tol
    max_iter = Config.NEWTON_MAX_ITER if max_iter is None else max_iter
    x = np.atleast_2d(np.asarray(x, dtype=float))
    nodes = np.broadcast_to(nodes, (len(x),) + np.shape(nodes)[-2:])

    def evaluate(P, idx):
        return np.einsum('ni,nid->nd', ref.basis(P), nodes[idx])

    if start is None:
        v = nodes[:, :3, :]
        M = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=-1)
        start = np.linalg.solve(M, (x - v[:, 0])[..., None])[..., 0]
    P = np.array(start, dtype=float)
    everything = np.arange(len(x))
    residual = evaluate(P, everything) - x
    done = np.zeros(len(x), dtype=bool)
    for iteration in range(max_iter):
        active = np.flatnonzero(~done)
        if not len(active):
            break
        J = np.einsum('nid,nik->ndk', nodes[active], ref.gradients(P[active]))
        try:
            step = np.linalg.solve(J, residual[active][..., None])[..., 0]
        except np.linalg.LinAlgError:
            break
        scale = np.ones(len(active))
        before = np.linalg.norm(residual[active], axis=1)
        for _ in range(10):
            trial = P[active] - scale[:, None] * step
            after = evaluate(trial, active) - x[active]
            worse = (np.linalg.norm(after, axis=1) > before) & (before > 1e-15)
            if not worse.any():
                break
            scale[worse] *= 0.5
        P[active] = trial
        residual[active] = after
        done[active] = np.linalg.norm(scale[:, None] * step, axis=1) <= tol
        logger.debug('Newton iteration %d: %d points active', iteration, len(active))
    return P, done


def exact_map(elem, points, gradient=False):
    return elem.exact_jacobian(points) if gradient else elem.exact_map(points)


def phi(elem, x):
    return elem.phi(x)


def phi_jacobian(elem, x):
    return elem.phi_jacobian(x)


def coefficient_matrix(elem, points):
    return elem.coefficient_matrix(points)


def elevate(mesh, r, polygon=None, quadrature_degree=None):
    """Elements of the degree-r isoparametric mesh; boundary nodes are g_i = F(a_i)."""
    polygon = polygon if polygon is not None else mesh.polygon
    if polygon is None and mesh.boundary_edges:
        raise PreconditionError('elevation of a mesh with boundary edges needs its polygon')
    ref = reference_element(r, quadrature_degree)
    checks = np.vstack([ref.quad_points, lattice(SAMPLE_ORDER)])
    bound = mesh.boundary_by_triangle
    elements = []
    for t, tri in enumerate(mesh.triangles):
        b = bound.get(t)
        if b is None:
            elements.append(ElementGeometry(t, mesh.vertices[tri], ref))
            continue
        elem = ElementGeometry(t, mesh.vertices[tri], ref, polygon.arcs[b.arc], b.local_edge, b.s_a, b.s_b)
        det = np.linalg.det(elem.jacobian(checks))
        if det.min() <= 0.0:
            raise ElevationError(f'non-positive Jacobian determinant {det.min():.3e}', element=t)
        elements.append(elem)
    logger.info('Elevated %d elements to degree %d (%d curved)', len(elements), r, len(bound))
    return elements


def element_errors(elem, samples=None):
    """Maxima of |Phi_h - Id|, |grad Phi_h - I|_F and |A_h - I|_F over reference samples."""
    if not elem.is_boundary:
        return 0.0, 0.0, 0.0
    P = lattice(SAMPLE_ORDER) if samples is None else samples
    phi_err = np.linalg.norm(elem._blend(P)[0] - elem.map(P), axis=1).max()
    G = elem.phi_gradient_at(P)
    eye = np.eye(2)
    grad_err = np.linalg.norm(G - eye, axis=(1, 2)).max()
    A_err = np.linalg.norm(elem.coefficient_matrix(P) - eye, axis=(1, 2)).max()
    return float(phi_err), float(grad_err), float(A_err)


def boundary_distance(elements, polygon, n=EDGE_SAMPLES):
    """Max distance from sampled curved edges of Omega_h to the exact boundary."""
    curved = [e for e in elements if e.is_boundary]
    if not curved:
        return 0.0
    pts = np.vstack([e.map(edge_points(e.local_edge, n)) for e in curved])
    return float(closest_boundary_many(polygon, pts)[2].max())


def inverse_estimate_ratio(elem, rng, trials=100):
    """max over random coefficient vectors of h * max|grad v| / max|v| on the sample lattice."""
    P = lattice(SAMPLE_ORDER)
    N = elem.ref.basis(P)
    inv_jac = np.linalg.inv(elem.jacobian(P))
    phys = np.einsum('nkd,nik->nid', inv_jac, elem.ref.gradients(P))
    coeffs = rng.standard_normal((trials, elem.ref.num_dofs))
    values = np.abs(coeffs @ N.T).max(axis=1)
    grads = np.linalg.norm(np.einsum('ti,nid->tnd', coeffs, phys), axis=2).max(axis=1)
    return float(np.max(elem.diameter * grads / values))


GEOMETRY_COLUMNS = ('h', 'phi_err', 'grad_phi_err', 'A_err', 'bdry_dist')


@dataclass
class GeometryDiagnostics:
    rows: List[dict] = field(default_factory=list)
    slopes: dict = field(default_factory=dict)

    def write_csv(self, path):
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow(GEOMETRY_COLUMNS)
            for row in self.rows:
                writer.writerow([f'{row[c]:.17g}' for c in GEOMETRY_COLUMNS])
            writer.writerow(['slope'] + [f'{self.slopes.get(c, float("nan")):.6g}' for c in GEOMETRY_COLUMNS[1:]])


def loglog_slope(hs, values):
    """Least-squares slope of log(value) against log(h) over the positive finite entries."""
    hs, values = np.asarray(hs, dtype=float), np.asarray(values, dtype=float)
    keep = np.isfinite(values) & (values > 0.0)
    if keep.sum() < 2:
        return float('nan')
    return float(stats.linregress(np.log(hs[keep]), np.log(values[keep])).slope)


def geometry_diagnostics(levels, polygon):
    """
    levels: sequence of (h, elements) of one domain and degree. Returns the
    per-level maxima with fitted log-log slopes.
    """
    out = GeometryDiagnostics()
    degrees = {elements[0].ref.degree for _, elements in levels if elements}
    if len(degrees) > 1:
        raise PreconditionError('geometry diagnostics need one degree across the h-sequence')
    for h, elements in levels:
        maxima = np.zeros(3)
        for elem in elements:
            maxima = np.maximum(maxima, element_errors(elem))
        out.rows.append({'h': float(h), 'phi_err': maxima[0], 'grad_phi_err': maxima[1],
                         'A_err': maxima[2], 'bdry_dist': boundary_distance(elements, polygon)})
    hs = [row['h'] for row in out.rows]
    for column in GEOMETRY_COLUMNS[1:]:
        out.slopes[column] = loglog_slope(hs, [row[column] for row in out.rows])
    return out
