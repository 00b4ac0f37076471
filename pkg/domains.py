"""
Stock domain registry and the custom domain file parser.

Stock domains: ``disk`` (unit circle), ``lens`` (intersection of the unit
disks centred at (+-0.4, 0)) and ``flower`` (polar graph 1 + 0.2 cos 5 theta).
Disk and lens carry manufactured solutions vanishing on the boundary; the
flower only carries a source term and is used with a fine reference solution.
"""
import math
import os
import re
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from errors import DomainError, DomainFileError
from geometry import CircleArc, CurvilinearPolygon, PolarArc


@dataclass(frozen=True)
class ManufacturedSolution:
    """Closed-form u with u = 0 on the boundary, its gradient and f = -Laplace(u)."""
    u: Callable
    grad: Callable
    f: Callable


@dataclass(frozen=True)
class DomainEntry:
    name: str
    polygon: CurvilinearPolygon
    solution: Optional[ManufacturedSolution] = None
    source: Optional[Callable] = None

    @property
    def rhs(self):
        return self.solution.f if self.solution is not None else self.source


def _disk_solution():
    def u(x, y):
        return (1.0 - x * x - y * y) * np.exp(x)

    def grad(x, y):
        e = np.exp(x)
        return np.stack([e * (1.0 - x * x - y * y - 2.0 * x), -2.0 * y * e], axis=-1)

    def f(x, y):
        return np.exp(x) * (3.0 + 4.0 * x + x * x + y * y)

    return ManufacturedSolution(u, grad, f)


def _lens_solution(offset=0.4):
    def levels(x, y):
        a = 1.0 - (x - offset) ** 2 - y * y
        b = 1.0 - (x + offset) ** 2 - y * y
        return a, b

    def u(x, y):
        a, b = levels(x, y)
        return a * b

    def grad(x, y):
        a, b = levels(x, y)
        gx = a * (-2.0 * (x + offset)) + b * (-2.0 * (x - offset))
        gy = a * (-2.0 * y) + b * (-2.0 * y)
        return np.stack([gx, gy], axis=-1)

    def f(x, y):
        a, b = levels(x, y)
        return 4.0 * (a + b) - 8.0 * (x * x + y * y - offset * offset)

    return ManufacturedSolution(u, grad, f)


def disk_polygon():
    return CurvilinearPolygon([CircleArc(0, (0.0, 0.0), 1.0, 0.0, 2.0 * math.pi)], name='disk')


def lens_polygon(offset=0.4):
    alpha = math.atan2(math.sqrt(1.0 - offset * offset), offset)
    return CurvilinearPolygon([
        CircleArc(0, (-offset, 0.0), 1.0, -alpha, alpha),
        CircleArc(1, (offset, 0.0), 1.0, math.pi - alpha, math.pi + alpha),
    ], name='lens')


def flower_polygon():
    return CurvilinearPolygon(
        [PolarArc(0, (0.0, 0.0), 0.0, 2.0 * math.pi, 1.0, ((5, 0.2, 0.0),))], name='flower')


def _constant_source(x, y):
    return 4.0 + 0.0 * x * y


_BUILDERS = {
    'disk': lambda: DomainEntry('disk', disk_polygon(), solution=_disk_solution()),
    'lens': lambda: DomainEntry('lens', lens_polygon(), solution=_lens_solution()),
    'flower': lambda: DomainEntry('flower', flower_polygon(), source=_constant_source),
}

STOCK_DOMAINS = tuple(_BUILDERS)

_cache = {}


def get_domain(name):
    """Registered domain by name (built once, then shared)."""
    if name not in _BUILDERS:
        raise DomainError(f'unknown domain {name!r}; choose from {", ".join(STOCK_DOMAINS)}')
    if name not in _cache:
        _cache[name] = _BUILDERS[name]()
    return _cache[name]


_PI_TOKEN = re.compile(
    r'^(?P<sign>[+-]?)(?:(?P<num>\d*\.?\d+(?:[eE][+-]?\d+)?)\*?)?pi(?:/(?P<den>\d*\.?\d+))?$')


def _number(token, line):
    try:
        return float(token)
    except ValueError:
        pass
    match = _PI_TOKEN.match(token)
    if not match:
        raise DomainFileError(f'not a number: {token!r}', line)
    value = math.pi * float(match.group('num') or 1.0) / float(match.group('den') or 1.0)
    return -value if match.group('sign') == '-' else value


def parse_domain_text(text, name=None):
    """
    Parse the custom domain grammar (see docs/domain-format.md)::

        name <identifier>
        circle <cx> <cy> <radius> <theta0> <theta1>
        polar <cx> <cy> <theta0> <theta1> <c0> [<k> <a_k> <b_k>]...

    Angles accept ``pi`` multiples such as ``-pi/2`` or ``2*pi``.
    """
    arcs = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        keyword, *args = line.split()
        if keyword == 'name':
            if len(args) != 1:
                raise DomainFileError('name takes one identifier', lineno)
            name = args[0]
        elif keyword == 'circle':
            if len(args) != 5:
                raise DomainFileError('circle needs cx cy radius theta0 theta1', lineno)
            cx, cy, radius, t0, t1 = (_number(a, lineno) for a in args)
            try:
                arcs.append(CircleArc(len(arcs), (cx, cy), radius, t0, t1))
            except DomainError as e:
                raise DomainFileError(str(e), lineno) from e
        elif keyword == 'polar':
            if len(args) < 5 or (len(args) - 5) % 3:
                raise DomainFileError('polar needs cx cy theta0 theta1 c0 followed by k a_k b_k triples', lineno)
            values = [_number(a, lineno) for a in args]
            cx, cy, t0, t1, c0 = values[:5]
            rest = values[5:]
            harmonics = [(int(rest[i]), rest[i + 1], rest[i + 2]) for i in range(0, len(rest), 3)]
            try:
                arcs.append(PolarArc(len(arcs), (cx, cy), t0, t1, c0, harmonics))
            except DomainError as e:
                raise DomainFileError(str(e), lineno) from e
        else:
            raise DomainFileError(f'unknown keyword {keyword!r}', lineno)
    if not arcs:
        raise DomainFileError('no arcs defined')
    return CurvilinearPolygon(arcs, name=name or 'custom')


def load_domain_file(path):
    """DomainEntry for a custom domain file; custom domains have no manufactured solution."""
    with open(path, 'r', encoding='utf-8') as f:
        polygon = parse_domain_text(f.read())
    return DomainEntry(polygon.name, polygon, source=_constant_source)


def resolve_domain(name_or_path):
    """Stock domain by name, or a custom domain loaded from a file path."""
    if name_or_path in _BUILDERS:
        return get_domain(name_or_path)
    if not os.path.isfile(name_or_path):
        raise DomainError(f"unknown domain {name_or_path!r}; use one of {', '.join(_BUILDERS)} or a domain file")
    return load_domain_file(name_or_path)
