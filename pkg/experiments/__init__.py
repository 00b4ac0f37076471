# Experiments package
import logging
import math
import os
from dataclasses import asdict, dataclass, field
from typing import Optional, Tuple

import numpy as np

from config import Config
from domains import resolve_domain
from errors import IsoparError, PreconditionError
from experiments.output import write_csv, write_gnuplot, write_json, write_manifest
from experiments.rates import RateTable

logger = logging.getLogger(__name__)

DEFAULT_TS = (0.0125, 0.025, 0.05)


@dataclass
class ExperimentConfig:
    experiment: str
    domain: str = 'disk'
    degree: int = 1
    hs: Tuple[float, ...] = Config.DEFAULT_HS
    ts: Tuple[float, ...] = DEFAULT_TS
    seed: Optional[int] = None
    out: Optional[str] = None
    quadrature_degree: Optional[int] = None
    method: str = 'cg'
    dump_matrix: bool = False

    def __post_init__(self):
        self.hs = tuple(float(h) for h in self.hs)
        self.ts = tuple(float(t) for t in self.ts)

    def to_dict(self):
        out = asdict(self)
        out['hs'], out['ts'] = list(self.hs), list(self.ts)
        return out

    @classmethod
    def from_dict(cls, data):
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    @property
    def output_dir(self):
        return self.out or Config.OUTPUT_DIR


@dataclass
class ExperimentResult:
    table: RateTable
    summary: dict = field(default_factory=dict)
    paths: list = field(default_factory=list)


EXPERIMENTS = {}


def register(module):
    """Register an experiment module exposing NAME, COLUMNS, compute_row and summarize."""
    EXPERIMENTS[module.NAME] = module
    return module


def get_experiment(name):
    if name not in EXPERIMENTS:
        raise PreconditionError(f'unknown experiment {name!r}; choose from {", ".join(EXPERIMENTS)}')
    return EXPERIMENTS[name]


def sweep_values(config):
    module = get_experiment(config.experiment)
    return config.ts if getattr(module, 'VARIABLE', 'h') == 't' else config.hs


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    return value


def safe_row(config, value):
    """One sweep row; package errors are recorded in the row's error column."""
    module = get_experiment(config.experiment)
    variable = getattr(module, 'VARIABLE', 'h')
    try:
        row = module.compute_row(config, value)
    except IsoparError as e:
        logger.warning('%s row %s=%s aborted: %s', config.experiment, variable, value, e)
        row = {variable: float(value), 'error': str(e)}
    row.setdefault('error', '')
    return {k: _plain(v) for k, v in row.items()}


def run_sweep(config):
    """All rows of a sweep, in parallel through Celery when enabled, joined in sweep order."""
    values = sweep_values(config)
    if Config.CELERY_ENABLED:
        from celery import group
        from tasks import compute_row
        logger.info('Dispatching %d %s rows to Celery', len(values), config.experiment)
        job = group(compute_row.s(config.experiment, config.to_dict(), v) for v in values)
        rows = job.apply_async().get()
    else:
        rows = [safe_row(config, v) for v in values]
    return rows


def build_table(config, rows):
    module = get_experiment(config.experiment)
    return RateTable(
        experiment=module.NAME,
        variable=getattr(module, 'VARIABLE', 'h'),
        quantity=module.QUANTITY,
        columns=tuple(module.COLUMNS) + ('error',),
        rows=rows,
        fit_columns=tuple(getattr(module, 'FIT_COLUMNS', (module.QUANTITY,))),
        with_log=getattr(module, 'LOG_MODEL', False) and config.degree == 1,
    )


def run_experiment(config, write=True):
    """Run the sweep, fit rates, summarize and write CSV/JSON/manifest/gnuplot outputs."""
    module = get_experiment(config.experiment)
    table = build_table(config, run_sweep(config))
    summary = module.summarize(config, table)
    summary.setdefault('slope', table.slope)
    summary.setdefault('band', list(table.band))
    summary.setdefault('model', table.model)
    summary.setdefault('finest_slope', table.finest_slope())
    summary['failed_rows'] = len(table.rows) - len(table.ok_rows)
    result = ExperimentResult(table, summary)
    if write:
        directory = config.output_dir
        os.makedirs(directory, exist_ok=True)
        name = module.NAME
        result.paths.append(write_csv(table, os.path.join(directory, f'{name}.csv')))
        result.paths.append(write_json(table, summary, config, os.path.join(directory, f'{name}.json')))
        result.paths.extend(write_gnuplot(table, directory))
        domain_text = resolve_domain(config.domain).polygon.describe()
        result.paths.append(write_manifest(config, domain_text, list(result.paths),
                                           os.path.join(directory, 'manifest.json')))
    logger.info('%s finished: slope %s', config.experiment,
                'n/a' if math.isnan(table.slope) else f'{table.slope:.3f}')
    return result


from experiments import converge, flow, geom, interp, matident, ritz, wmp  # noqa: E402

for _module in (wmp, converge, geom, interp, matident, flow, ritz):
    register(_module)
