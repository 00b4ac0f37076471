"""
实验套件测试
Rate fitting, table writers and end-to-end experiment runs on coarse sweeps.
"""
import csv
import json
import math
import os

import numpy as np
import pytest

from experiments import (
    build_table, EXPERIMENTS, ExperimentConfig, get_experiment, run_experiment, safe_row, sweep_values,
)
from experiments.output import input_hash, write_csv
from experiments.rates import best_fit, fit_power, POWER, POWER_LOG, RateTable
from errors import PreconditionError

COARSE_HS = (0.5, 0.4, 0.3)


def test_registry_holds_every_experiment():
    assert set(EXPERIMENTS) == {'wmp', 'converge', 'geom', 'interp', 'matident', 'flow', 'ritz'}
    with pytest.raises(PreconditionError):
        get_experiment('nope')


def test_sweep_variable():
    assert sweep_values(ExperimentConfig('flow', ts=(0.01, 0.02))) == (0.01, 0.02)
    assert sweep_values(ExperimentConfig('converge', hs=COARSE_HS)) == COARSE_HS


def test_config_dict_round_trip():
    config = ExperimentConfig('geom', domain='lens', degree=2, hs=[0.2, 0.1, 0.05], seed=3)
    again = ExperimentConfig.from_dict(dict(config.to_dict(), unknown='ignored'))
    assert again == config
    assert again.hs == (0.2, 0.1, 0.05)


def test_exact_power_law_fit():
    hs = np.array([0.2, 0.1, 0.05, 0.025])
    fit = fit_power(hs, 3.0 * hs ** 2)
    assert fit.slope == pytest.approx(2.0, abs=1e-12)
    assert fit.r2 == pytest.approx(1.0, abs=1e-12)
    assert fit.band[0] == pytest.approx(2.0, abs=1e-9)
    assert fit.model == POWER
    assert fit.points == 4


def test_fit_needs_three_points():
    fit = fit_power([0.2, 0.1], [0.04, 0.01])
    assert math.isnan(fit.slope)
    assert fit.points == 2


def test_log_model_is_preferred_when_it_fits_better():
    hs = np.array([0.2, 0.1, 0.05, 0.025])
    values = hs ** 2 * np.log(2.0 + 1.0 / hs)
    fit = best_fit(hs, values, with_log=True)
    assert fit.model == POWER_LOG
    assert fit.slope == pytest.approx(2.0, abs=1e-10)
    assert best_fit(hs, values, with_log=False).model == POWER


def test_rate_table_orders_rows_and_skips_errors():
    rows = [
        {'h': 0.1, 'err': 0.01, 'error': ''},
        {'h': 0.4, 'err': 0.16, 'error': ''},
        {'h': 0.05, 'err': 99.0, 'error': 'solver failed'},
        {'h': 0.2, 'err': 0.04, 'error': ''},
    ]
    table = RateTable('demo', 'h', 'err', ('h', 'err', 'error'), rows, fit_columns=('err',))
    assert list(table.xs) == [0.4, 0.2, 0.1, 0.05]
    assert np.isnan(table.values('err')[-1])
    assert len(table.ok_rows) == 3
    assert table.slope == pytest.approx(2.0, abs=1e-12)
    assert table.spread() == pytest.approx(16.0)


def test_csv_has_slope_footer(tmp_path):
    rows = [{'h': h, 'err': h ** 2, 'error': ''} for h in (0.4, 0.2, 0.1)]
    table = RateTable('demo', 'h', 'err', ('h', 'err', 'error'), rows, fit_columns=('err',))
    path = write_csv(table, str(tmp_path / 'demo.csv'))
    with open(path, newline='', encoding='utf-8') as f:
        lines = list(csv.reader(f))
    assert lines[0] == ['h', 'err', 'error']
    assert len(lines) == 5
    assert lines[-1][0] == 'slope'
    assert float(lines[-1][1]) == pytest.approx(2.0)


def test_input_hash_is_stable():
    config = ExperimentConfig('interp', hs=COARSE_HS)
    assert input_hash(config, 'circle 0 0 1 0 6.28') == input_hash(config, 'circle 0 0 1 0 6.28')
    assert input_hash(config, 'a') != input_hash(config, 'b')


def test_failed_row_is_recorded(flower):
    row = safe_row(ExperimentConfig('ritz', domain='flower', hs=COARSE_HS), 0.5)
    assert row['h'] == 0.5
    assert 'closed-form' in row['error']


def test_matident_run_writes_outputs(tmp_path):
    config = ExperimentConfig('matident', hs=COARSE_HS, out=str(tmp_path), dump_matrix=True)
    result = run_experiment(config)
    assert result.summary['identity_holds']
    assert result.summary['failed_rows'] == 0
    names = set(os.listdir(tmp_path))
    for name in ('matident.csv', 'matident.json', 'matident.dat', 'matident.gp', 'manifest.json'):
        assert name in names
    assert 'matrix_disk_P1_h0.5.txt' in names

    with open(tmp_path / 'matident.json', encoding='utf-8') as f:
        payload = json.load(f)
    assert payload['schema_version'] == 1
    assert payload['config']['hs'] == list(COARSE_HS)
    with open(tmp_path / 'manifest.json', encoding='utf-8') as f:
        manifest = json.load(f)
    assert len(manifest['input_sha256']) == 64
    assert manifest['seed'] == 42
    assert 'matident.csv' in manifest['outputs']
    for row in result.table.rows:
        assert row['kernel_residual'] <= 1e-12
        assert row['symmetry_defect'] <= 1e-12


def test_wmp_rows(tmp_path):
    result = run_experiment(ExperimentConfig('wmp', hs=COARSE_HS, out=str(tmp_path)), write=False)
    assert result.summary['failed_rows'] == 0
    assert result.summary['control_defect'] <= 1e-8
    for row in result.table.rows:
        assert 1.0 - 1e-12 <= row['max_ratio'] < 10.0
        assert row['smooth_ratio'] >= 1.0 - 1e-12
    assert math.isfinite(result.summary['stability'])


def test_converge_rows_on_disk():
    result = run_experiment(ExperimentConfig('converge', hs=(0.4, 0.2, 0.1)), write=False)
    table = result.table
    assert result.summary['failed_rows'] == 0
    errors = table.values('linf_error')
    assert errors[-1] < errors[0]
    assert table.fit.points == 3
    assert table.model in (POWER, POWER_LOG)
    assert result.summary['expected_slope'] == 2


def test_interp_and_geom_rows(lens):
    hs = (0.3, 0.25, 0.2)
    interp = run_experiment(ExperimentConfig('interp', domain='lens', degree=2, hs=hs), write=False)
    assert interp.summary['failed_rows'] == 0
    geom = run_experiment(ExperimentConfig('geom', domain='lens', degree=2, hs=hs), write=False)
    assert geom.summary['failed_rows'] == 0
    for row in geom.table.rows:
        assert row['bdry_dist'] < row['h'] ** 2
        assert row['inverse_constant'] > 0.0


def test_ritz_rows_on_disk():
    result = run_experiment(ExperimentConfig('ritz', hs=COARSE_HS, degree=2), write=False)
    assert result.summary['failed_rows'] == 0
    assert result.summary['max_idempotence_defect'] <= 1e-8


def test_flow_experiment_fits_unit_slope():
    result = run_experiment(ExperimentConfig('flow'), write=False)
    table = result.table
    assert table.variable == 't'
    assert list(table.xs) == [0.05, 0.025, 0.0125]
    assert table.slope == pytest.approx(1.0, abs=1e-3)
    assert result.summary['monotone_escape']
    assert result.summary['lam'] == pytest.approx(1.0, abs=1e-3)


def test_build_table_uses_log_model_for_linear_elements():
    config = ExperimentConfig('converge', degree=1, hs=COARSE_HS)
    rows = [{'h': h, 'linf_error': h ** 2, 'error': ''} for h in COARSE_HS]
    assert build_table(config, rows).with_log
    config.degree = 2
    assert not build_table(config, rows).with_log


@pytest.mark.slow
def test_converge_on_flower_uses_reference_solution():
    result = run_experiment(ExperimentConfig('converge', domain='flower', hs=COARSE_HS), write=False)
    assert result.summary['failed_rows'] == 0
    assert np.all(result.table.values('linf_error') > 0.0)


def test_finest_slope_uses_the_two_finest_rows():
    rows = [{'h': h, 'err': v, 'error': ''} for h, v in ((0.4, 1.0), (0.2, 0.5), (0.1, 0.0625))]
    table = RateTable('demo', 'h', 'err', ('h', 'err', 'error'), rows, fit_columns=('err',))
    assert table.finest_slope() == pytest.approx(3.0)
    assert table.slope < 3.0


def _run(experiment, domain='disk', degree=1):
    result = run_experiment(ExperimentConfig(experiment, domain=domain, degree=degree), write=False)
    assert result.summary['failed_rows'] == 0
    return result


@pytest.mark.slow
@pytest.mark.parametrize('domain, degree, low, high', [
    ('disk', 1, 1.8, math.inf),
    ('disk', 2, 2.6, 3.4),
    ('disk', 3, 3.5, 4.5),
    ('lens', 1, 1.8, math.inf),
    ('lens', 2, 2.6, 3.4),
])
def test_converge_rates_with_closed_form_solutions(domain, degree, low, high):
    result = _run('converge', domain, degree)
    print(f"✅ {domain} P{degree}: slope {result.table.slope:.3f}")
    assert low <= result.table.slope <= high
    assert result.summary['best_approximation_constant'] <= 10.0


@pytest.mark.slow
@pytest.mark.parametrize('degree', [1, 2])
def test_converge_rates_on_flower_from_finest_levels(degree):
    result = _run('converge', 'flower', degree)
    print(f"✅ flower P{degree}: fitted {result.table.slope:.3f} finest {result.summary['finest_slope']:.3f}")
    assert abs(result.summary['finest_slope'] - (degree + 1)) <= 0.5
    assert result.summary['best_approximation_constant'] <= 10.0


@pytest.mark.slow
@pytest.mark.parametrize('domain', ['lens', 'flower'])
def test_maximum_principle_constant_is_stable(domain):
    result = _run('wmp', domain)
    assert result.summary['stability'] <= 1.5
    assert result.summary['control_defect'] <= 1e-8


@pytest.mark.slow
def test_ritz_h1_rate():
    result = _run('ritz')
    assert abs(result.table.slope - 1.0) <= 0.3
    assert result.summary['max_idempotence_defect'] <= 1e-8


@pytest.mark.slow
@pytest.mark.parametrize('domain, degree', [('disk', 3), ('lens', 2), ('lens', 3)])
def test_interpolation_rates(domain, degree):
    result = _run('interp', domain, degree)
    print(f"✅ {domain} P{degree}: interp slope {result.table.slope:.3f}")
    assert abs(result.table.slope - (degree + 1)) <= 0.4


@pytest.mark.slow
@pytest.mark.parametrize('degree', [1, 2, 3])
def test_interpolation_rates_on_flower(degree):
    result = _run('interp', 'flower', degree)
    assert result.summary['finest_slope'] >= degree + 1 - 0.4
