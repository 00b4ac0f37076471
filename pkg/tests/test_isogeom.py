"""
等参几何测试
Reference element, exact blended map, Phi_h, A_h and the geometric perturbation rates.
"""
import math

import numpy as np
import pytest

from errors import DomainError, PreconditionError
from geometry import CircleArc
from isogeom import (
    barycentric, coefficient_matrix, edge_points, elevate, element_errors, ElementGeometry, exact_map,
    geometry_diagnostics, inverse_estimate_ratio, lattice, phi, phi_jacobian, quadrature, reference_element,
)
from meshgen import generate


@pytest.fixture(scope='module')
def quarter_element():
    arc = CircleArc(0, (0.0, 0.0), 1.0, 0.0, 0.5 * math.pi)
    vertices = [(1.0, 0.0), (0.0, 1.0), (0.0, 0.0)]
    return ElementGeometry(0, vertices, reference_element(1), arc, 0, 0.0, 1.0)


@pytest.mark.parametrize('degree', [1, 2, 3, 4, 6, 8])
def test_quadrature_exactness(degree):
    points, weights = quadrature(degree)
    assert weights.sum() == pytest.approx(0.5, abs=1e-14)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            approx = np.sum(weights * points[:, 0] ** a * points[:, 1] ** b)
            assert approx == pytest.approx(exact, abs=1e-14)


@pytest.mark.parametrize('degree', [1, 2, 3])
def test_reference_basis_is_nodal(degree):
    ref = reference_element(degree)
    assert ref.num_dofs == (degree + 1) * (degree + 2) // 2
    assert np.allclose(ref.basis(ref.nodes), np.eye(ref.num_dofs), atol=1e-12)
    P = lattice(5)
    assert np.allclose(ref.basis(P).sum(axis=1), 1.0, atol=1e-12)
    assert np.allclose(ref.gradients(P).sum(axis=1), 0.0, atol=1e-10)


def test_reference_element_preconditions():
    with pytest.raises(PreconditionError):
        reference_element(4)
    with pytest.raises(PreconditionError):
        reference_element(2, 3)


def test_quarter_circle_exact_map(quarter_element):
    assert np.allclose(exact_map(quarter_element, (0.5, 0.0)), (math.sqrt(0.5), math.sqrt(0.5)), atol=1e-14)
    assert np.allclose(exact_map(quarter_element, (0.0, 1.0)), (0.0, 0.0), atol=1e-14)
    centroid = exact_map(quarter_element, (1.0 / 3.0, 1.0 / 3.0))
    assert np.allclose(centroid, (0.471404, 0.471404), atol=1e-6)


def test_exact_map_rejects_points_outside(quarter_element):
    with pytest.raises(DomainError):
        exact_map(quarter_element, (1.0, 1.0))


def test_exact_jacobian_matches_finite_differences(quarter_element):
    P = np.array([0.3, 0.25])
    step = 1e-6
    jac = exact_map(quarter_element, P, gradient=True)
    for k in range(2):
        e = np.zeros(2)
        e[k] = step
        column = (exact_map(quarter_element, P + e) - exact_map(quarter_element, P - e)) / (2.0 * step)
        assert np.allclose(jac[:, k], column, atol=1e-7)


def test_degree_one_elements_are_affine(disk_mesh):
    P = lattice(4)
    for elem in elevate(disk_mesh, 1):
        assert np.allclose(elem.map(P), elem.affine(P), atol=1e-14)


def test_degree_two_midnodes_lie_on_circle(disk_mesh):
    for elem in elevate(disk_mesh, 2):
        if elem.is_boundary:
            mid = elem.nodes[elem.ref.edge_dofs[elem.local_edge][1]]
            assert abs(np.linalg.norm(mid) - 1.0) <= 1e-12


@pytest.mark.slow
def test_flower_elevation_has_positive_jacobians(flower):
    mesh = generate(flower.polygon, 0.1)
    checks = lattice(9)
    for elem in elevate(mesh, 2):
        assert np.linalg.det(elem.jacobian(checks)).min() > 0.0


def test_phi_is_identity_on_interior_elements(disk_mesh):
    elem = next(e for e in elevate(disk_mesh, 2) if not e.is_boundary)
    x = elem.affine(np.array([[0.2, 0.3], [0.1, 0.1]]))
    assert np.array_equal(phi(elem, x), x)
    assert np.array_equal(phi_jacobian(elem, x), np.broadcast_to(np.eye(2), (2, 2, 2)))
    assert np.array_equal(coefficient_matrix(elem, [[0.2, 0.3]]), np.eye(2)[None])


def test_phi_maps_nodes_to_exact_map_images(disk_mesh):
    elem = next(e for e in elevate(disk_mesh, 2) if e.is_boundary)
    images = phi(elem, elem.nodes)
    assert np.allclose(images, elem.exact_map(elem.ref.nodes), atol=1e-10)


def test_phi_sends_chord_midpoints_to_the_circle(disk_mesh):
    for elem in elevate(disk_mesh, 1):
        if not elem.is_boundary:
            continue
        a, b = elem.vertices[elem.local_edge], elem.vertices[(elem.local_edge + 1) % 3]
        assert abs(np.linalg.norm(phi(elem, 0.5 * (a + b))) - 1.0) <= 1e-12


def test_coefficient_matrix_is_close_to_identity(disk):
    mesh = generate(disk.polygon, 0.2)
    h = mesh.h
    for elem in elevate(mesh, 2):
        if not elem.is_boundary:
            continue
        A = coefficient_matrix(elem, elem.ref.quad_points)
        assert np.allclose(A, np.transpose(A, (0, 2, 1)), atol=1e-14)
        assert np.linalg.norm(A - np.eye(2), axis=(1, 2)).max() <= 10.0 * h * h
        eig = np.linalg.eigvalsh(A)
        assert eig.min() >= 1.0 - 10.0 * h * h
        assert eig.max() <= 1.0 + 10.0 * h * h


def test_interior_elements_have_no_geometric_error(disk_mesh):
    for elem in elevate(disk_mesh, 2):
        if not elem.is_boundary:
            assert element_errors(elem) == (0.0, 0.0, 0.0)


def test_barycentric_partition():
    lam = barycentric(lattice(6))
    assert np.allclose(lam.sum(axis=1), 1.0)
    assert lam.min() >= -1e-15


@pytest.mark.slow
@pytest.mark.parametrize('degree, column', [(1, 'phi_err'), (2, 'A_err')])
def test_geometric_perturbation_rates(disk, degree, column):
    levels = []
    for h in (0.2, 0.1, 0.05, 0.025):
        mesh = generate(disk.polygon, h)
        levels.append((h, elevate(mesh, degree)))
    diagnostics = geometry_diagnostics(levels, disk.polygon)
    print(f"✅ P{degree} {column} slope {diagnostics.slopes[column]:.3f}")
    assert 1.7 <= diagnostics.slopes[column] <= 2.3


def quarter(degree):
    arc = CircleArc(0, (0.0, 0.0), 1.0, 0.0, 0.5 * math.pi)
    return ElementGeometry(0, [(1.0, 0.0), (0.0, 1.0), (0.0, 0.0)], reference_element(degree), arc, 0, 0.0, 1.0)


def test_blend_weight_power():
    assert [quarter(r).blend_power for r in (1, 2, 3)] == [1, 3, 4]


@pytest.mark.parametrize('degree', [2, 3])
def test_higher_degree_exact_jacobian_matches_finite_differences(degree):
    elem = quarter(degree)
    step = 1e-6
    for P in (np.array([0.3, 0.25]), np.array([0.05, 0.1]), np.array([0.6, 0.35])):
        jac = exact_map(elem, P, gradient=True)
        for k in range(2):
            e = np.zeros(2)
            e[k] = step
            column = (exact_map(elem, P + e) - exact_map(elem, P - e)) / (2.0 * step)
            assert np.allclose(jac[:, k], column, atol=1e-7)


@pytest.mark.parametrize('degree', [2, 3])
def test_curved_edge_is_the_arc_and_straight_edges_stay_straight(degree):
    elem = quarter(degree)
    curved = exact_map(elem, edge_points(0, 41))
    assert np.allclose(np.linalg.norm(curved, axis=1), 1.0, atol=1e-13)
    for e in (1, 2):
        P = edge_points(e, 41)
        assert np.allclose(exact_map(elem, P), elem.affine(P), atol=1e-14)
        assert np.allclose(elem.map(P), elem.affine(P), atol=1e-13)


@pytest.mark.parametrize('degree', [2, 3])
def test_mesh_elements_conform_along_straight_edges(disk_mesh, degree):
    for elem in elevate(disk_mesh, degree):
        if not elem.is_boundary:
            continue
        arc_side = elem.exact_map(edge_points(elem.local_edge, 17))
        assert np.allclose(np.linalg.norm(arc_side, axis=1), 1.0, atol=1e-12)
        for e in range(3):
            if e != elem.local_edge:
                P = edge_points(e, 17)
                assert np.allclose(elem.exact_map(P), elem.affine(P), atol=1e-13)


@pytest.mark.parametrize('degree', [2, 3])
def test_newton_round_trip(disk_mesh, rng, degree):
    for elem in elevate(disk_mesh, degree):
        if not elem.is_boundary:
            continue
        lam = rng.dirichlet(np.ones(3), size=100)
        x = elem.map(lam[:, 1:])
        back = elem.map(elem.inverse(x))
        assert np.abs(back - x).max() <= 1e-10



def _diagnostics(domain, degree, hs=(0.2, 0.1, 0.05, 0.025)):
    return geometry_diagnostics([(h, elevate(generate(domain.polygon, h), degree)) for h in hs], domain.polygon)


@pytest.mark.slow
@pytest.mark.parametrize('degree', [2, 3])
def test_higher_degree_geometric_rates_on_disk(disk, degree):
    slopes = _diagnostics(disk, degree).slopes
    print(f"✅ disk P{degree}: phi_err {slopes['phi_err']:.3f} A_err {slopes['A_err']:.3f}")
    assert abs(slopes['phi_err'] - (degree + 1)) <= 0.3
    assert abs(slopes['A_err'] - degree) <= 0.4


@pytest.mark.slow
@pytest.mark.parametrize('degree', [1, 2, 3])
def test_geometric_rates_on_flower(flower, degree):
    # the coarsest levels resolve the petal valleys poorly, so rates may overshoot
    slopes = _diagnostics(flower, degree).slopes
    print(f"✅ flower P{degree}: phi_err {slopes['phi_err']:.3f} A_err {slopes['A_err']:.3f}")
    assert slopes['phi_err'] >= degree + 1 - 0.3
    assert slopes['A_err'] >= degree - 0.4


@pytest.mark.slow
def test_inverse_estimate_constant_is_stable(disk):
    constants = []
    for h in (0.2, 0.1, 0.05):
        rng = np.random.default_rng(42)
        curved = [e for e in elevate(generate(disk.polygon, h), 2) if e.is_boundary]
        constants.append(max(inverse_estimate_ratio(e, rng) for e in curved))
    assert max(constants) <= 2.0 * min(constants)
