"""Flow-map sandwich check over the t-sequence."""
import math
from functools import lru_cache

import numpy as np

from config import Config
from domains import resolve_domain
from flowmap import build_field, collar_points, escape_is_monotone, semigroup_defect, verify_sandwich

NAME = 'flow'
VARIABLE = 't'
QUANTITY = 'min_dist'
COLUMNS = ('t', 'min_dist', 'max_dist', 'lam', 'min_det', 'semigroup_defect')
FIT_COLUMNS = ('min_dist', 'max_dist')
COLLAR_POINTS = 100


@lru_cache(maxsize=4)
def outward_field(domain):
    return build_field(resolve_domain(domain).polygon)


def compute_row(config, t):
    field_ = outward_field(config.domain)
    row = verify_sandwich(field_, [t]).rows[0]
    rng = np.random.default_rng(Config.SEED if config.seed is None else config.seed)
    row['semigroup_defect'] = semigroup_defect(field_, t, collar_points(field_, COLLAR_POINTS, rng)) if t > 0 else 0.0
    return row


def summarize(config, table):
    field_ = outward_field(config.domain)
    lams = table.values('lam')
    lams = lams[np.isfinite(lams)]
    return {
        'lam': float(lams.min()) if len(lams) else math.nan,
        'min_det': float(np.nanmin(table.values('min_det'))) if table.ok_rows else None,
        'max_semigroup_defect': float(np.nanmax(table.values('semigroup_defect'))) if table.ok_rows else None,
        'outward_constant': field_.outward_constant(),
        'monotone_escape': escape_is_monotone(field_, config.ts),
        'width': field_.width,
        'cutoff': field_.cutoff,
    }
