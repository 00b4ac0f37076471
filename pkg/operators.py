"""
Discrete operators and estimators on an isoparametric space.

Sampling conventions for maximum-norm errors:
  ``omega``   compares u(F(x_hat)) with u_h(x_hat), i.e. the transplanted
              function on the exact domain.
  ``omega_h`` compares u(F_K(x_hat)) with u_h(x_hat) on the computational
              domain, u extended by its closed form.
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from config import Config
from errors import PreconditionError
from femcore import (
    apply_dirichlet, assemble_load, assemble_stiffness, build_space, solve, SparseSystem,
)
from isogeom import barycentric, edge_points, elevate, EDGE_SAMPLES, invert_points
from meshgen import generate

logger = logging.getLogger(__name__)

CONVENTIONS = ('omega', 'omega_h')
INTERPOLATION_MODES = ('omega_h', 'omega')


@dataclass(eq=False)
class DiscreteFunction:
    space: object
    coefficients: np.ndarray
    mode: str = 'omega_h'
    solver: Optional[object] = None

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.space.num_dofs,):
            raise PreconditionError(
                f'coefficient length {self.coefficients.shape} does not match {self.space.num_dofs} dofs')

    def __repr__(self):
        return f'<DiscreteFunction P{self.space.degree} dofs={self.space.num_dofs} mode={self.mode}>'

    @property
    def local(self):
        return self.coefficients[self.space.dofs]

    def reference_values(self, points):
        """u_h at reference points of every element, shape (nt, n)."""
        return self.local @ self.space.ref.basis(points).T

    def reference_gradients(self, points):
        """Reference gradients of u_h, shape (nt, n, 2)."""
        return np.einsum('ti,nid->tnd', self.local, self.space.ref.gradients(points))


def mapped_points(space, points, exact=True):
    """Images of reference points under F (exact) or F_K, shape (nt, n, 2)."""
    out = np.empty((len(space.elements), len(points), 2))
    for elem in space.elements:
        if not elem.is_boundary:
            out[elem.id] = elem.affine(points)
        else:
            out[elem.id] = elem.exact_map(points) if exact else elem.map(points)
    return out


def _evaluate(u, X):
    return np.asarray(u(X[..., 0], X[..., 1]), dtype=float) * np.ones(X.shape[:-1])


def interpolate(space, g, mode='omega_h'):
    """
    Nodal interpolant of g. Both modes evaluate g at the node images
    F_K(a_i) = F(a_i); the mode records which domain the result lives on.
    """
    if mode not in INTERPOLATION_MODES:
        raise PreconditionError(f'mode must be one of {INTERPOLATION_MODES}, got {mode!r}')
    return DiscreteFunction(space, _evaluate(g, space.coordinates), mode=mode)


def _boundary_values(space, g):
    if callable(g):
        return _evaluate(g, space.coordinates[space.boundary_dofs])
    if isinstance(g, dict):
        return g
    return np.asarray(g, dtype=float)


def discrete_harmonic(space, g, method='cg', matrix=None):
    """
    u_h with boundary values g whose Dirichlet form vanishes on interior test
    functions. A previously assembled approx-mode matrix may be passed in.
    """
    matrix = assemble_stiffness(space, 'approx') if matrix is None else matrix
    system = SparseSystem(matrix, np.zeros(space.num_dofs), space.boundary_dofs)
    reduced = apply_dirichlet(system, _boundary_values(space, g))
    result = solve(reduced, method)
    return DiscreteFunction(space, reduced.expand(result.x), solver=result)


def solve_poisson(space, f, method='cg'):
    """Homogeneous Dirichlet Poisson solve on Omega_h."""
    system = SparseSystem(assemble_stiffness(space, 'approx'), assemble_load(space, f), space.boundary_dofs)
    reduced = apply_dirichlet(system, 0.0)
    result = solve(reduced, method)
    logger.info('Poisson solve: %d unknowns, %d iterations, residual %.2e',
                reduced.size, result.iterations, result.residual)
    return DiscreteFunction(space, reduced.expand(result.x), solver=result)


def _exact_pullback(space):
    """Exact-map Jacobians, their determinants and A_h at the quadrature points."""
    quad = space.ref.quad_points
    nt, nq = len(space.elements), len(quad)
    J = np.empty((nt, nq, 2, 2))
    A = np.broadcast_to(np.eye(2), (nt, nq, 2, 2)).copy()
    for elem in space.elements:
        if elem.is_boundary:
            J[elem.id] = elem.exact_jacobian(quad)
            A[elem.id] = elem.coefficient_matrix(quad)
        else:
            J[elem.id] = elem.matrix
    return J, np.linalg.det(J), A


def _transplanted_gradients(source, J_inv, quad, X):
    if isinstance(source, DiscreteFunction):
        return np.einsum('tqkd,tqk->tqd', J_inv, source.reference_gradients(quad))
    return np.asarray(source(X[..., 0], X[..., 1]), dtype=float)


def ritz_project(space, gradient, method='cg'):
    """
    Ritz projection for the form (A_h grad v, grad chi) on Omega with zero
    boundary values. gradient is a callable (x, y) -> (..., 2) or a
    DiscreteFunction transplanted through Phi_h.
    """
    ref = space.ref
    quad = ref.quad_points
    J, det, A = _exact_pullback(space)
    J_inv = np.linalg.inv(J)
    X = mapped_points(space, quad, exact=True)
    grad_v = _transplanted_gradients(gradient, J_inv, quad, X)
    grad_n = np.einsum('tqkd,qik->tqid', J_inv, ref.gradients(quad))
    local = np.einsum('q,tq,tqde,tqe,tqid->ti', ref.quad_weights, np.abs(det), A, grad_v, grad_n)
    rhs = np.bincount(space.dofs.ravel(), weights=local.ravel(), minlength=space.num_dofs)
    system = SparseSystem(assemble_stiffness(space, 'exact'), rhs, space.boundary_dofs)
    reduced = apply_dirichlet(system, 0.0)
    result = solve(reduced, method)
    return DiscreteFunction(space, reduced.expand(result.x), mode='omega', solver=result)


def h1_seminorm_error(uh, gradient, convention='omega'):
    """Discrete H1 seminorm of v - u_h by quadrature; gradient as in ritz_project."""
    if convention not in CONVENTIONS:
        raise PreconditionError(f'convention must be one of {CONVENTIONS}, got {convention!r}')
    space = uh.space
    quad = space.ref.quad_points
    if convention == 'omega':
        J, det, _ = _exact_pullback(space)
    else:
        J = np.stack([elem.jacobian(quad) for elem in space.elements])
        det = np.linalg.det(J)
    J_inv = np.linalg.inv(J)
    X = mapped_points(space, quad, exact=(convention == 'omega'))
    exact = _transplanted_gradients(gradient, J_inv, quad, X)
    approx = np.einsum('tqkd,tqk->tqd', J_inv, uh.reference_gradients(quad))
    sq = np.einsum('q,tq,tqd->', space.ref.quad_weights, np.abs(det), (exact - approx) ** 2)
    return float(np.sqrt(sq))


def linf_error(uh, u, convention='omega'):
    """Sampled maximum of |u - u_h| on the lattice of order r + 3 plus quadrature points."""
    if convention not in CONVENTIONS:
        raise PreconditionError(f'convention must be one of {CONVENTIONS}, got {convention!r}')
    P = uh.space.ref.evaluation_points()
    X = mapped_points(uh.space, P, exact=(convention == 'omega'))
    return float(np.max(np.abs(_evaluate(u, X) - uh.reference_values(P))))


def boundary_sup(uh, n=EDGE_SAMPLES):
    """max |u_h| over n samples per curved boundary edge."""
    best = 0.0
    for elem in uh.space.boundary_elements:
        values = uh.space.ref.basis(edge_points(elem.local_edge, n)) @ uh.local[elem.id]
        best = max(best, float(np.abs(values).max()))
    return best


def interior_sup(uh):
    """max |u_h| over the element evaluation points of Omega_h."""
    return float(np.abs(uh.reference_values(uh.space.ref.evaluation_points())).max())


def log_factor(h, degree):
    """ln(2 + 1/h) for linear elements, 1 otherwise."""
    return float(np.log(2.0 + 1.0 / h)) if degree == 1 else 1.0


class ReferenceSolution:
    """
    Fine-mesh Poisson solution of degree r + 1 used as ground truth where no
    closed form exists. Evaluation locates points by a KD-tree over element
    centroids and Newton inversion of F_K; points outside the fine
    computational domain use the polynomial extension of the nearest element.
    """

    def __init__(self, polygon, f, h_ref, degree, seed=None, candidates=8, method='cg'):
        self.h_ref = float(h_ref)
        self.degree = int(degree)
        mesh = generate(polygon, self.h_ref, seed=seed)
        self.space = build_space(mesh, elevate(mesh, self.degree, polygon), self.degree)
        self.solution = solve_poisson(self.space, f, method)
        self._nodes = np.stack([elem.nodes for elem in self.space.elements])
        self._local = self.solution.local
        self._tree = cKDTree(mesh.vertices[mesh.triangles].mean(axis=1))
        self._k = min(candidates, mesh.num_triangles)
        logger.info('Reference solution: h_ref=%.4g degree=%d dofs=%d',
                    self.h_ref, self.degree, self.space.num_dofs)

    @classmethod
    def for_sweep(cls, polygon, f, hs, degree, seed=None, factor=None):
        factor = Config.REFERENCE_FACTOR if factor is None else factor
        return cls(polygon, f, min(hs) / factor, degree + 1, seed=seed)

    def _values(self, elements, X):
        P, converged = invert_points(self.space.ref, self._nodes[elements], X)
        values = np.einsum('ni,ni->n', self.space.ref.basis(P), self._local[elements])
        return values, P, converged

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        X = np.column_stack([x.ravel(), y.ravel()])
        _, candidates = self._tree.query(X, k=self._k)
        candidates = candidates.reshape(len(X), -1)
        out = np.full(len(X), np.nan)
        found = np.zeros(len(X), dtype=bool)
        for j in range(candidates.shape[1]):
            todo = np.flatnonzero(~found)
            if not len(todo):
                break
            values, P, converged = self._values(candidates[todo, j], X[todo])
            inside = converged & (barycentric(P).min(axis=1) >= -1e-10)
            out[todo[inside]] = values[inside]
            found[todo[inside]] = True
        rest = np.flatnonzero(~found)
        if len(rest):
            out[rest] = self._values(candidates[rest, 0], X[rest])[0]
        return out.reshape(x.shape)
