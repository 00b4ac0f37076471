"""
测试公共夹具
Shared fixtures: stock domains, coarse meshes and small straight meshes.
"""
import os
import sys

PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

os.environ.setdefault('ISOPAR_ENV', 'testing')

import numpy as np
import pytest

from domains import get_domain
from femcore import build_space
from isogeom import elevate
from meshgen import generate, Mesh


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: mesh sweeps down to h = 0.025 (deselect with -m "not slow")')


@pytest.fixture(scope='session')
def disk():
    return get_domain('disk')


@pytest.fixture(scope='session')
def lens():
    return get_domain('lens')


@pytest.fixture(scope='session')
def flower():
    return get_domain('flower')


@pytest.fixture(scope='session')
def disk_mesh(disk):
    return generate(disk.polygon, 0.3)


@pytest.fixture(scope='session')
def coarse_disk_mesh(disk):
    return generate(disk.polygon, 0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def square_mesh(n=2):
    """Straight n x n grid of the unit square, two counterclockwise triangles per cell."""
    xs = np.linspace(0.0, 1.0, n + 1)
    vertices = np.array([(x, y) for y in xs for x in xs])
    triangles = []
    for j in range(n):
        for i in range(n):
            a = j * (n + 1) + i
            b, c = a + 1, a + n + 1
            triangles.extend([(a, b, c + 1), (a, c + 1, c)])
    return Mesh(vertices, np.array(triangles), ())


def straight_space(n, degree):
    mesh = square_mesh(n)
    return build_space(mesh, elevate(mesh, degree), degree)


def square_boundary_dofs(space):
    x, y = space.coordinates[:, 0], space.coordinates[:, 1]
    on_edge = (np.abs(x) < 1e-12) | (np.abs(x - 1.0) < 1e-12) | (np.abs(y) < 1e-12) | (np.abs(y - 1.0) < 1e-12)
    return np.flatnonzero(on_edge)
