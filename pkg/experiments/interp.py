"""Interpolation error rates of I_h on Omega_h and of the transplanted interpolant on Omega."""
import numpy as np

from experiments.pipeline import level
from operators import interpolate, linf_error

NAME = 'interp'
QUANTITY = 'smooth_error'
COLUMNS = ('h', 'dofs', 'smooth_error', 'smooth_error_omega_h', 'quadratic_error')
FIT_COLUMNS = ('smooth_error', 'smooth_error_omega_h', 'quadratic_error')


def smooth_function(x, y):
    return np.sin(x) * np.cos(y) * (1.0 - x * x - y * y)


def quadratic_function(x, y):
    return x * x + y * y


def compute_row(config, h):
    space = level(config, h).space
    return {
        'h': float(h),
        'dofs': space.num_dofs,
        'smooth_error': linf_error(interpolate(space, smooth_function, 'omega'), smooth_function, 'omega'),
        'smooth_error_omega_h': linf_error(interpolate(space, smooth_function, 'omega_h'),
                                           smooth_function, 'omega_h'),
        'quadratic_error': linf_error(interpolate(space, quadratic_function, 'omega'),
                                      quadratic_function, 'omega'),
    }


def summarize(config, table):
    return {'slopes': dict(table.slopes), 'expected_slope': config.degree + 1}
