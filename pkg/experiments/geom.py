"""Geometric perturbation rates of Phi_h and A_h."""
import numpy as np

from config import Config
from experiments.pipeline import level
from isogeom import GEOMETRY_COLUMNS, geometry_diagnostics, inverse_estimate_ratio

NAME = 'geom'
QUANTITY = 'A_err'
COLUMNS = GEOMETRY_COLUMNS + ('inverse_constant',)
FIT_COLUMNS = GEOMETRY_COLUMNS[1:]


def compute_row(config, h):
    lvl = level(config, h)
    row = geometry_diagnostics([(h, lvl.elements)], lvl.entry.polygon).rows[0]
    rng = np.random.default_rng(Config.SEED if config.seed is None else config.seed)
    curved = [e for e in lvl.elements if e.is_boundary]
    row['inverse_constant'] = max((inverse_estimate_ratio(e, rng) for e in curved), default=0.0)
    return row


def summarize(config, table):
    return {
        'slopes': dict(table.slopes),
        'expected': {'phi_err': config.degree + 1, 'grad_phi_err': config.degree,
                     'A_err': config.degree, 'bdry_dist': config.degree + 1},
        'inverse_constant_spread': table.spread('inverse_constant'),
    }
