"""
Ritz projection for the perturbed form: idempotence on the exact-geometry
space, H1 error rate and the maximum-norm best-approximation ratio.
"""
import numpy as np

from domains import resolve_domain
from errors import PreconditionError
from experiments.pipeline import level
from operators import (
    DiscreteFunction, h1_seminorm_error, interpolate, linf_error, log_factor, ritz_project,
)

NAME = 'ritz'
QUANTITY = 'h1_error'
COLUMNS = ('h', 'dofs', 'h1_error', 'linf_error', 'interp_error', 'best_approx_ratio', 'idempotence_defect')
FIT_COLUMNS = ('h1_error', 'linf_error', 'interp_error')


def idempotence_defect(space, u):
    """max coefficient change of R_h applied to the zero-trace interpolant of u."""
    w = interpolate(space, u, mode='omega').coefficients
    w[space.boundary_dofs] = 0.0
    member = DiscreteFunction(space, w, mode='omega')
    return float(np.max(np.abs(ritz_project(space, member).coefficients - w)))


def compute_row(config, h):
    solution = resolve_domain(config.domain).solution
    if solution is None:
        raise PreconditionError(f'the ritz experiment needs a closed-form solution; {config.domain} has none')
    space = level(config, h).space
    projected = ritz_project(space, solution.grad, config.method)
    linf = linf_error(projected, solution.u, 'omega')
    interp = linf_error(interpolate(space, solution.u, 'omega'), solution.u, 'omega')
    return {
        'h': float(h),
        'dofs': space.num_dofs,
        'h1_error': h1_seminorm_error(projected, solution.grad, 'omega'),
        'linf_error': linf,
        'interp_error': interp,
        'best_approx_ratio': linf / (log_factor(h, config.degree) * interp) if interp > 0.0 else float('nan'),
        'idempotence_defect': idempotence_defect(space, solution.u),
    }


def summarize(config, table):
    defects = table.values('idempotence_defect')
    return {
        'max_idempotence_defect': float(np.nanmax(defects)) if table.ok_rows else None,
        'best_approx_spread': table.spread('best_approx_ratio'),
        'expected_slope': config.degree,
    }
