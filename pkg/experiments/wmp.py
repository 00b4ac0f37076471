"""
Weak maximum principle sweep.

For each h the ratio sup over Omega_h / sup over the boundary of discrete
harmonic functions is measured for nodal deltas at 32 boundary dofs spread
along the boundary, for sin(7 angle) data around the centroid, and for the
constant control.
"""
import numpy as np

from femcore import assemble_stiffness
from geometry import boundary_position, closest_boundary_many
from experiments.pipeline import level
from operators import boundary_sup, discrete_harmonic, interior_sup

NAME = 'wmp'
QUANTITY = 'max_ratio'
COLUMNS = ('h', 'dofs', 'max_ratio', 'smooth_ratio', 'control_ratio', 'strict_dmp', 'cg_iterations')
FIT_COLUMNS = ()

DELTA_COUNT = 32
SMOOTH_FREQUENCY = 7


def delta_positions(space, count=DELTA_COUNT):
    """Indices into space.boundary_dofs of count dofs equally spaced along the boundary."""
    polygon = space.polygon
    coords = space.coordinates[space.boundary_dofs]
    arcs, params, _ = closest_boundary_many(polygon, coords)
    order = np.argsort(boundary_position(polygon, arcs, params), kind='stable')
    picks = np.linspace(0, len(order), min(count, len(order)), endpoint=False).astype(int)
    return order[picks]


def ratio(uh):
    return interior_sup(uh) / boundary_sup(uh)


def compute_row(config, h):
    lvl = level(config, h)
    space = lvl.space
    matrix = assemble_stiffness(space, 'approx')
    nb = len(space.boundary_dofs)

    iterations = 0
    ratios = []
    for k in delta_positions(space):
        data = np.zeros(nb)
        data[k] = 1.0
        uh = discrete_harmonic(space, data, config.method, matrix=matrix)
        iterations = max(iterations, uh.solver.iterations)
        ratios.append(ratio(uh))

    cx, cy = lvl.entry.polygon.centroid
    smooth = discrete_harmonic(
        space, lambda x, y: np.sin(SMOOTH_FREQUENCY * np.arctan2(y - cy, x - cx)), config.method, matrix=matrix)
    control = discrete_harmonic(space, np.ones(nb), config.method, matrix=matrix)
    max_ratio = max(ratios)
    return {
        'h': float(h),
        'dofs': space.num_dofs,
        'max_ratio': max_ratio,
        'smooth_ratio': ratio(smooth),
        'control_ratio': ratio(control),
        'strict_dmp': int(max_ratio <= 1.0 + 1e-12),
        'cg_iterations': iterations,
    }


def summarize(config, table):
    control = table.values('control_ratio')
    control = control[np.isfinite(control)]
    return {
        'stability': table.spread('max_ratio'),
        'max_ratio': float(np.nanmax(table.values('max_ratio'))) if table.ok_rows else None,
        'control_defect': float(np.max(np.abs(control - 1.0))) if len(control) else None,
        'strict_dmp_holds': all(row.get('strict_dmp') for row in table.ok_rows),
    }
