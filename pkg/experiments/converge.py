"""Maximum-norm convergence of the Poisson solve against the interpolation error."""
import numpy as np

from experiments.pipeline import exact_solution, level
from operators import interpolate, linf_error, log_factor, solve_poisson

NAME = 'converge'
QUANTITY = 'linf_error'
COLUMNS = ('h', 'dofs', 'linf_error', 'linf_error_omega_h', 'interp_error', 'log_factor',
           'cg_iterations', 'residual')
FIT_COLUMNS = ('linf_error', 'linf_error_omega_h', 'interp_error')
LOG_MODEL = True


def compute_row(config, h):
    space = level(config, h).space
    u, f = exact_solution(config)
    uh = solve_poisson(space, f, config.method)
    interp = interpolate(space, u, mode='omega')
    return {
        'h': float(h),
        'dofs': space.num_dofs,
        'linf_error': linf_error(uh, u, 'omega'),
        'linf_error_omega_h': linf_error(uh, u, 'omega_h'),
        'interp_error': linf_error(interp, u, 'omega'),
        'log_factor': log_factor(h, config.degree),
        'cg_iterations': uh.solver.iterations,
        'residual': uh.solver.residual,
    }


def best_approximation_constant(table, degree):
    """Smallest C with error <= C (l_h interp_error + h^(r+1)) on every row."""
    h = table.xs
    bound = table.values('log_factor') * table.values('interp_error') + h ** (degree + 1)
    ratio = table.values('linf_error') / bound
    ratio = ratio[np.isfinite(ratio)]
    return float(ratio.max()) if len(ratio) else None


def summarize(config, table):
    gap = np.abs(table.values('linf_error') - table.values('linf_error_omega_h'))
    gap = gap[np.isfinite(gap)]
    return {
        'best_approximation_constant': best_approximation_constant(table, config.degree),
        'convention_gap': float(gap.max()) if len(gap) else None,
        'expected_slope': config.degree + 1,
    }
