"""
离散算子测试
Interpolation, discrete harmonic extension, Poisson solve, Ritz projection and error estimators.
"""
import numpy as np
import pytest

from conftest import straight_space
from errors import PreconditionError
from femcore import build_space
from isogeom import elevate
from meshgen import generate
from operators import (
    boundary_sup, discrete_harmonic, DiscreteFunction, h1_seminorm_error, interior_sup, interpolate,
    linf_error, log_factor, ReferenceSolution, ritz_project, solve_poisson,
)


def _space(mesh, r):
    return build_space(mesh, elevate(mesh, r), r)


def _paraboloid(x, y):
    return 1.0 - x * x - y * y


def _paraboloid_gradient(x, y):
    return np.stack([-2.0 * x, -2.0 * y], axis=-1)


@pytest.mark.parametrize('r', [1, 2, 3])
def test_linear_interpolation_is_exact_on_affine_elements(r):
    space = straight_space(2, r)
    g = lambda x, y: 0.5 + 2.0 * x - 3.0 * y
    assert linf_error(interpolate(space, g), g, 'omega_h') <= 1e-12


def test_constant_interpolation(disk_mesh):
    space = _space(disk_mesh, 2)
    uh = interpolate(space, lambda x, y: 3.0 + 0.0 * x, mode='omega')
    assert np.allclose(uh.coefficients, 3.0)
    assert uh.mode == 'omega'
    with pytest.raises(PreconditionError):
        interpolate(space, _paraboloid, mode='exact')


def test_coefficient_length_is_checked(disk_mesh):
    space = _space(disk_mesh, 1)
    with pytest.raises(PreconditionError):
        DiscreteFunction(space, np.zeros(space.num_dofs + 1))


@pytest.mark.slow
def test_quadratic_interpolation_rate(disk):
    hs, errors = (0.2, 0.1, 0.05), []
    for h in hs:
        space = _space(generate(disk.polygon, h), 2)
        q = lambda x, y: x * x + y * y
        errors.append(linf_error(interpolate(space, q, 'omega'), q, 'omega'))
    slope = np.polyfit(np.log(hs), np.log(errors), 1)[0]
    print(f"✅ P2 interpolation slope {slope:.3f}")
    assert 2.6 <= slope <= 3.4


def test_discrete_harmonic_constant(disk_mesh):
    space = _space(disk_mesh, 2)
    uh = discrete_harmonic(space, lambda x, y: 1.0 + 0.0 * x)
    assert np.allclose(uh.coefficients, 1.0, atol=1e-8)
    assert uh.solver.residual <= 1e-12


def test_discrete_harmonic_delta_is_bounded(lens):
    space = _space(generate(lens.polygon, 0.1), 1)
    data = np.zeros(len(space.boundary_dofs))
    data[len(data) // 3] = 1.0
    uh = discrete_harmonic(space, data, method='dense')
    assert boundary_sup(uh) == pytest.approx(1.0)
    ratio = interior_sup(uh) / boundary_sup(uh)
    assert 1.0 <= ratio <= 2.0
    cg = discrete_harmonic(space, data)
    assert np.allclose(cg.coefficients, uh.coefficients, atol=1e-9)


def test_poisson_with_zero_source(disk_mesh):
    uh = solve_poisson(_space(disk_mesh, 2), lambda x, y: 0.0 * x)
    assert not uh.coefficients.any()


def test_poisson_paraboloid_error_decreases(disk):
    errors = []
    for h in (0.2, 0.1):
        space = _space(generate(disk.polygon, h), 1)
        uh = solve_poisson(space, lambda x, y: 4.0 + 0.0 * x)
        errors.append(linf_error(uh, _paraboloid, 'omega'))
    assert errors[1] * 2.5 <= errors[0]


def test_ritz_projection_is_idempotent(disk_mesh):
    space = _space(disk_mesh, 2)
    w = interpolate(space, _paraboloid, mode='omega').coefficients
    w[space.boundary_dofs] = 0.0
    projected = ritz_project(space, DiscreteFunction(space, w, mode='omega'))
    assert np.allclose(projected.coefficients, w, atol=1e-8)
    assert projected.mode == 'omega'


def test_ritz_projection_of_zero(disk_mesh):
    space = _space(disk_mesh, 1)
    projected = ritz_project(space, lambda x, y: np.zeros(np.shape(x) + (2,)))
    assert not projected.coefficients.any()


def test_ritz_h1_error_decreases(disk):
    errors = []
    for h in (0.2, 0.1):
        space = _space(generate(disk.polygon, h), 1)
        projected = ritz_project(space, _paraboloid_gradient)
        errors.append(h1_seminorm_error(projected, _paraboloid_gradient, 'omega'))
    assert errors[1] < 0.75 * errors[0]


def test_linf_error_of_zero_function_is_sup_norm(disk_mesh):
    space = _space(disk_mesh, 2)
    uh = interpolate(space, _paraboloid)
    assert linf_error(uh, lambda x, y: 0.0 * x, 'omega_h') == pytest.approx(interior_sup(uh))
    with pytest.raises(PreconditionError):
        linf_error(uh, _paraboloid, 'omega_tilde')


def test_log_factor():
    assert log_factor(0.1, 1) == pytest.approx(np.log(12.0))
    assert log_factor(0.1, 2) == 1.0


def test_reference_solution_evaluation(disk):
    reference = ReferenceSolution(disk.polygon, lambda x, y: 4.0 + 0.0 * x, 0.2, 2)
    values = reference(np.array([0.0, 0.5, 0.99]), np.array([0.0, 0.0, 0.0]))
    assert values.shape == (3,)
    assert np.allclose(values, _paraboloid(np.array([0.0, 0.5, 0.99]), 0.0), atol=1e-2)
    assert np.isfinite(reference(1.01, 0.0))
