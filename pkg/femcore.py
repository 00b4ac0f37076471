"""
Global Lagrange space, stiffness/load assembly, Dirichlet elimination and
solvers.

Global dof numbering: mesh vertices, then r - 1 nodes per mesh edge running
from its lower to its higher vertex index, then one interior node per
triangle (r = 3).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg
from scipy import sparse

from config import Config
from errors import AssemblyError, ConstraintError, PreconditionError, SolverError

logger = logging.getLogger(__name__)

MODES = ('approx', 'exact')


@dataclass(eq=False)
class FeSpace:
    mesh: object
    elements: list
    ref: object
    dofs: np.ndarray
    coordinates: np.ndarray
    boundary_dofs: np.ndarray

    @property
    def degree(self):
        return self.ref.degree

    @property
    def num_dofs(self):
        return len(self.coordinates)

    @property
    def polygon(self):
        return self.mesh.polygon

    @property
    def interior_dofs(self):
        return np.setdiff1d(np.arange(self.num_dofs), self.boundary_dofs)

    @property
    def boundary_elements(self):
        return [e for e in self.elements if e.is_boundary]

    @property
    def h(self):
        return self.mesh.h

    def __repr__(self):
        return f'<FeSpace P{self.degree} dofs={self.num_dofs} h={self.h:.4g}>'


def build_space(mesh, elements, r):
    """Global degree-r Lagrange space on the elevated mesh."""
    if len(elements) != mesh.num_triangles:
        raise PreconditionError('one element geometry per triangle is required')
    ref = elements[0].ref
    if ref.degree != r:
        raise PreconditionError(f'elements were elevated to degree {ref.degree}, not {r}')

    nv, nt = mesh.num_vertices, mesh.num_triangles
    tri, tri_edges = mesh.triangles, mesh.triangle_edges
    num_edges = len(mesh.edges)
    dofs = np.zeros((nt, ref.num_dofs), dtype=np.int64)
    dofs[:, :3] = tri
    for e in range(3):
        inner = ref.edge_dofs[e][1:-1]
        forward = tri[:, e] < tri[:, (e + 1) % 3]
        for j, local in enumerate(inner, start=1):
            position = np.where(forward, j, r - j) - 1
            dofs[:, local] = nv + tri_edges[:, e] * (r - 1) + position
    if ref.interior_dofs:
        dofs[:, ref.interior_dofs[0]] = nv + num_edges * (r - 1) + np.arange(nt)

    num_dofs = nv + num_edges * (r - 1) + (nt if ref.interior_dofs else 0)
    coordinates = np.zeros((num_dofs, 2))
    for elem in elements:
        coordinates[dofs[elem.id]] = elem.nodes

    boundary = set()
    for b in mesh.boundary_edges:
        boundary.update(int(d) for d in dofs[b.triangle, list(ref.edge_dofs[b.local_edge])])
    space = FeSpace(mesh, list(elements), ref, dofs, coordinates, np.array(sorted(boundary), dtype=np.int64))
    logger.info('Built P%d space: %d dofs (%d on the boundary)', r, num_dofs, len(boundary))
    return space


def _jacobians(space, exact=False):
    """Per-element Jacobians at the quadrature points, shape (nt, nq, 2, 2)."""
    quad = space.ref.quad_points
    J = np.empty((len(space.elements), len(quad), 2, 2))
    for elem in space.elements:
        if not elem.is_boundary:
            J[elem.id] = elem.matrix
        elif exact:
            J[elem.id] = elem.exact_jacobian(quad)
        else:
            J[elem.id] = elem.jacobian(quad)
    return J


def _checked_det(J):
    det = np.linalg.det(J)
    bad = np.flatnonzero((det <= 0.0).any(axis=1))
    if len(bad):
        raise AssemblyError('singular or inverted element Jacobian', element=int(bad[0]))
    return det


def _scatter(space, local):
    nloc = space.ref.num_dofs
    rows = np.repeat(space.dofs, nloc, axis=1).ravel()
    cols = np.tile(space.dofs, (1, nloc)).ravel()
    n = space.num_dofs
    return sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def element_matrices(space, mode='approx'):
    """Element stiffness matrices, shape (nt, nloc, nloc)."""
    if mode not in MODES:
        raise PreconditionError(f'mode must be one of {MODES}, got {mode!r}')
    ref = space.ref
    w = ref.quad_weights
    grads = ref.gradients(ref.quad_points)
    J = _jacobians(space, exact=(mode == 'exact'))
    det = _checked_det(J)
    G = np.einsum('tqkd,qik->tqid', np.linalg.inv(J), grads)
    if mode == 'approx':
        return np.einsum('q,tq,tqid,tqjd->tij', w, np.abs(det), G, G)

    A = np.broadcast_to(np.eye(2), J.shape).copy()
    for elem in space.boundary_elements:
        A[elem.id] = elem.coefficient_matrix(ref.quad_points)
    local = np.einsum('q,tq,tqde,tqie,tqjd->tij', w, np.abs(det), A, G, G)
    return 0.5 * (local + np.transpose(local, (0, 2, 1)))


def assemble_stiffness(space, mode='approx'):
    """Global stiffness matrix (CSR); 'exact' pulls back through the blended map with A_h."""
    matrix = _scatter(space, element_matrices(space, mode))
    logger.info('Assembled %s stiffness: %d dofs, %d nonzeros', mode, matrix.shape[0], matrix.nnz)
    return matrix


def physical_quadrature_points(space):
    """F_K images of the quadrature points, shape (nt, nq, 2)."""
    quad = space.ref.quad_points
    return np.stack([elem.map(quad) for elem in space.elements])


def assemble_load(space, f):
    """Load vector of f pulled back through F_K."""
    ref = space.ref
    J = _jacobians(space)
    det = np.abs(_checked_det(J))
    X = physical_quadrature_points(space)
    values = np.asarray(f(X[..., 0], X[..., 1]), dtype=float) * np.ones(X.shape[:2])
    local = np.einsum('q,tq,tq,qi->ti', ref.quad_weights, det, values, ref.basis(ref.quad_points))
    return np.bincount(space.dofs.ravel(), weights=local.ravel(), minlength=space.num_dofs)


@dataclass(eq=False)
class SparseSystem:
    matrix: sparse.csr_matrix
    rhs: np.ndarray
    boundary_dofs: np.ndarray
    constraints: dict = field(default_factory=dict)

    @property
    def size(self):
        return self.matrix.shape[0]

    def symmetry_defect(self):
        diff = abs(self.matrix - self.matrix.T).max()
        scale = abs(self.matrix).max() or 1.0
        return float(diff / scale)


def assemble_system(space, f=None, mode='approx'):
    matrix = assemble_stiffness(space, mode)
    rhs = assemble_load(space, f) if f is not None else np.zeros(space.num_dofs)
    return SparseSystem(matrix, rhs, space.boundary_dofs)


@dataclass(eq=False)
class ReducedSystem:
    matrix: sparse.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    constrained: np.ndarray
    values: np.ndarray

    @property
    def size(self):
        return self.matrix.shape[0]

    def expand(self, x):
        """Full coefficient vector with the constrained values in place."""
        full = np.zeros(len(self.free) + len(self.constrained))
        full[self.free] = x
        full[self.constrained] = self.values
        return full


def apply_dirichlet(system, values):
    """
    Symmetric elimination of the boundary dofs. values maps dof -> value or is
    an array aligned with system.boundary_dofs.
    """
    boundary = np.asarray(system.boundary_dofs, dtype=np.int64)
    if isinstance(values, dict):
        extra = set(values) - set(int(d) for d in boundary)
        if extra:
            raise ConstraintError(f'values given for non-boundary dofs {sorted(extra)[:5]}')
        missing = [int(d) for d in boundary if int(d) not in values]
        if missing:
            raise ConstraintError(f'no value for boundary dofs {missing[:5]}')
        vals = np.array([values[int(d)] for d in boundary], dtype=float)
    else:
        vals = np.broadcast_to(np.asarray(values, dtype=float), boundary.shape).copy()

    n = system.size
    mask = np.zeros(n, dtype=bool)
    mask[boundary] = True
    free = np.flatnonzero(~mask)
    A = system.matrix.tocsr()
    A_ff = A[free][:, free]
    rhs = system.rhs[free] - A[free][:, boundary] @ vals
    system.constraints.update(zip((int(d) for d in boundary), vals))
    return ReducedSystem(A_ff.tocsr(), rhs, free, boundary, vals)


class CgResult(NamedTuple):
    x: np.ndarray
    iterations: int
    residual: float


def iteration_cap(n):
    return int(20 * math.sqrt(n)) + 500


def solve_cg(system, rtol=None, max_iter=None, x0=None):
    """Jacobi-preconditioned conjugate gradients on an SPD system."""
    rtol = Config.CG_RTOL if rtol is None else rtol
    A, b = system.matrix, np.asarray(system.rhs, dtype=float)
    n = len(b)
    max_iter = iteration_cap(n) if max_iter is None else max_iter
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    norm_b = np.linalg.norm(b)
    if n == 0 or norm_b == 0.0:
        return CgResult(np.zeros(n), 0, 0.0)

    diag = A.diagonal()
    inv_diag = np.where(diag > 0.0, 1.0 / np.where(diag > 0.0, diag, 1.0), 1.0)
    r = b - A @ x
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    residual = np.linalg.norm(r) / norm_b
    k = 0
    while residual > rtol:
        if k >= max_iter:
            raise SolverError('conjugate gradients reached the iteration cap', residual=residual, iterations=k)
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        k += 1
        residual = np.linalg.norm(r) / norm_b
        if residual <= rtol:
            break
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
        if k % 100 == 0:
            logger.debug('CG iteration %d: residual %.3e', k, residual)
    logger.debug('CG converged in %d iterations (residual %.3e)', k, residual)
    return CgResult(x, k, float(residual))


def solve_dense(system):
    """Dense Cholesky solve; an oracle for systems below the dense fallback size."""
    n = system.size
    if n > Config.DENSE_FALLBACK_DOFS:
        raise PreconditionError(f'dense solve limited to {Config.DENSE_FALLBACK_DOFS} dofs, got {n}')
    if n == 0:
        return CgResult(np.zeros(0), 0, 0.0)
    A = system.matrix.toarray() if sparse.issparse(system.matrix) else np.asarray(system.matrix)
    x = scipy.linalg.solve(A, system.rhs, assume_a='pos')
    norm_b = np.linalg.norm(system.rhs) or 1.0
    return CgResult(x, 0, float(np.linalg.norm(system.rhs - A @ x) / norm_b))


def solve(system, method='cg'):
    if method == 'dense':
        return solve_dense(system)
    return solve_cg(system)


def write_matrix(matrix, path):
    """Coordinate text export, one 'i j value' line per stored entry."""
    coo = sparse.coo_matrix(matrix)
    order = np.lexsort((coo.col, coo.row))
    with open(path, 'w', encoding='utf-8') as f:
        for i, j, v in zip(coo.row[order], coo.col[order], coo.data[order]):
            f.write(f'{i} {j} {v:.17g}\n')
