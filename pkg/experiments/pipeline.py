"""Shared mesh -> elevation -> space pipeline for experiment rows."""
import logging
from functools import lru_cache
from typing import NamedTuple

from config import Config
from domains import resolve_domain
from femcore import build_space
from isogeom import elevate
from meshgen import generate
from operators import ReferenceSolution

logger = logging.getLogger(__name__)


class Level(NamedTuple):
    entry: object
    mesh: object
    elements: list
    space: object


@lru_cache(maxsize=16)
def _level(domain, h, degree, seed, quadrature_degree):
    entry = resolve_domain(domain)
    mesh = generate(entry.polygon, h, seed=seed)
    elements = elevate(mesh, degree, entry.polygon, quadrature_degree)
    space = build_space(mesh, elements, degree)
    logger.info('Level %s h=%.4g P%d: %d triangles, %d dofs', domain, h, degree, mesh.num_triangles, space.num_dofs)
    return Level(entry, mesh, elements, space)


def level(config, h, degree=None):
    """Mesh, elements and space of one sweep row (cached per process)."""
    seed = Config.SEED if config.seed is None else config.seed
    return _level(config.domain, float(h), degree or config.degree, seed, config.quadrature_degree)


@lru_cache(maxsize=4)
def _reference(domain, hs, degree, seed):
    entry = resolve_domain(domain)
    return ReferenceSolution.for_sweep(entry.polygon, entry.rhs, hs, degree, seed=seed)


def reference_solution(config):
    """Fine reference solution shared by all rows of a sweep."""
    seed = Config.SEED if config.seed is None else config.seed
    return _reference(config.domain, tuple(config.hs), config.degree, seed)


def exact_solution(config):
    """(u, f) of the configured domain: closed form when registered, else the reference solution."""
    entry = resolve_domain(config.domain)
    if entry.solution is not None:
        return entry.solution.u, entry.solution.f
    return reference_solution(config), entry.rhs
