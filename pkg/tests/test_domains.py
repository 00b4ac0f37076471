"""
域注册表与域文件解析测试
Stock domain registry, manufactured solutions and the custom domain file grammar.
"""
import math

import numpy as np
import pytest

from domains import get_domain, load_domain_file, parse_domain_text, resolve_domain, STOCK_DOMAINS
from errors import DomainError, DomainFileError
from geometry import boundary_samples


def test_registry_names():
    assert STOCK_DOMAINS == ('disk', 'lens', 'flower')
    assert get_domain('disk') is get_domain('disk')
    with pytest.raises(DomainError):
        get_domain('square')


@pytest.mark.parametrize('name', ['disk', 'lens'])
def test_manufactured_solution_vanishes_on_boundary(name):
    entry = get_domain(name)
    points = boundary_samples(entry.polygon, 512).points
    assert np.abs(entry.solution.u(points[:, 0], points[:, 1])).max() < 1e-10


@pytest.mark.parametrize('name', ['disk', 'lens'])
def test_manufactured_solution_is_consistent(name, rng):
    entry = get_domain(name)
    sol = entry.solution
    P = rng.uniform(-0.3, 0.3, size=(50, 2))
    x, y = P[:, 0], P[:, 1]
    step = 1e-3

    laplacian = (sol.u(x + step, y) + sol.u(x - step, y) + sol.u(x, y + step) + sol.u(x, y - step)
                 - 4.0 * sol.u(x, y)) / step ** 2
    assert np.allclose(-laplacian, sol.f(x, y), rtol=1e-4, atol=1e-4)

    gx = (sol.u(x + step, y) - sol.u(x - step, y)) / (2.0 * step)
    gy = (sol.u(x, y + step) - sol.u(x, y - step)) / (2.0 * step)
    assert np.allclose(sol.grad(x, y), np.column_stack([gx, gy]), atol=1e-5)
    assert entry.rhs is sol.f


def test_flower_has_source_only(flower):
    assert flower.solution is None
    assert flower.rhs(0.0, 0.0) == pytest.approx(4.0)


def test_parse_circle_with_pi_tokens():
    polygon = parse_domain_text('name unit\ncircle 0 0 1 0 2*pi  # full turn\n')
    assert polygon.name == 'unit'
    assert polygon.arcs[0].theta1 == pytest.approx(2.0 * math.pi)
    assert polygon.perimeter == pytest.approx(2.0 * math.pi, rel=1e-12)


def test_parse_lens_description_round_trip(lens):
    polygon = parse_domain_text(lens.polygon.describe())
    assert len(polygon.corners) == 2
    for a, b in zip(polygon.arcs, lens.polygon.arcs):
        assert np.allclose(a.point(np.linspace(0, 1, 5)), b.point(np.linspace(0, 1, 5)), atol=1e-15)


def test_parse_polar_harmonics():
    polygon = parse_domain_text('polar 0 0 0 2*pi 1 5 0.2 0')
    assert np.allclose(polygon.arcs[0].point(0.0), (1.2, 0.0))


@pytest.mark.parametrize('text, line', [
    ('circle 0 0 1 0\n', 1),
    ('\n# comment\nsquare 1 2 3\n', 3),
    ('circle 0 0 1 0 2*pi\ncircle 0 0 one 0 pi\n', 2),
    ('polar 0 0 0 2*pi 1 5 0.2\n', 1),
])
def test_malformed_domain_text_reports_line(text, line):
    with pytest.raises(DomainFileError) as excinfo:
        parse_domain_text(text)
    assert excinfo.value.line == line
    assert f'line {line}' in str(excinfo.value)


def test_empty_domain_text():
    with pytest.raises(DomainFileError):
        parse_domain_text('# nothing here\n')


def test_domain_file_resolution(tmp_path):
    path = tmp_path / 'ellipse.dom'
    path.write_text('name wobble\npolar 0 0 0 2*pi 1 3 0.1 0\n', encoding='utf-8')
    entry = load_domain_file(str(path))
    assert entry.name == 'wobble'
    assert entry.solution is None
    assert resolve_domain(str(path)).polygon.name == 'wobble'
    assert resolve_domain('disk') is get_domain('disk')


def test_unknown_domain_name_is_rejected():
    with pytest.raises(DomainError):
        resolve_domain('hexagon')
