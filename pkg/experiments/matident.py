"""Entrywise comparison of the approx-mode and exact-mode stiffness matrices."""
import os

import numpy as np

from experiments.pipeline import level
from femcore import assemble_stiffness, SparseSystem, write_matrix

NAME = 'matident'
QUANTITY = 'max_rel_diff'
COLUMNS = ('h', 'dofs', 'nnz', 'max_rel_diff', 'kernel_residual', 'symmetry_defect')
FIT_COLUMNS = ()
TOLERANCE = 1e-10


def compute_row(config, h):
    space = level(config, h).space
    approx = assemble_stiffness(space, 'approx')
    exact = assemble_stiffness(space, 'exact')
    scale = abs(approx).max()
    diff = abs(approx - exact).max() / scale
    kernel = np.abs(approx @ np.ones(space.num_dofs)).max() / scale
    if config.dump_matrix:
        directory = config.output_dir
        os.makedirs(directory, exist_ok=True)
        write_matrix(approx, os.path.join(directory, f'matrix_{config.domain}_P{config.degree}_h{h:g}.txt'))
    return {
        'h': float(h),
        'dofs': space.num_dofs,
        'nnz': int(approx.nnz),
        'max_rel_diff': float(diff),
        'kernel_residual': float(kernel),
        'symmetry_defect': SparseSystem(approx, np.zeros(space.num_dofs), space.boundary_dofs).symmetry_defect(),
    }


def summarize(config, table):
    diffs = table.values('max_rel_diff')
    worst = float(np.nanmax(diffs)) if table.ok_rows else None
    return {'max_rel_diff': worst, 'identity_holds': worst is not None and worst <= TOLERANCE}
