"""
命令行测试
Click commands for the experiments, mesh generation and the flow check.
"""
import csv
import json

import pytest
from click.testing import CliRunner

from app import cli
from meshgen import read_mesh


@pytest.fixture
def runner():
    return CliRunner()


def test_every_experiment_has_a_command():
    for name in ('wmp', 'converge', 'geom', 'interp', 'matident', 'flow', 'ritz', 'meshgen', 'flowcheck'):
        assert name in cli.commands


def test_help_lists_every_subcommand(runner):
    result = runner.invoke(cli, ['--help'])
    assert result.exit_code == 0
    for name in ('converge', 'meshgen', 'flowcheck'):
        assert name in result.output


def test_meshgen_command(runner, tmp_path):
    out = tmp_path / 'disk.mesh'
    result = runner.invoke(cli, ['meshgen', '--domain', 'disk', '--h', '0.5', '--out', str(out)])
    assert result.exit_code == 0, result.output
    assert '✅' in result.output
    assert read_mesh(str(out)).num_triangles > 0


def test_meshgen_rejects_unknown_domain(runner, tmp_path):
    result = runner.invoke(cli, ['meshgen', '--domain', 'hexagon', '--h', '0.5', '--out', str(tmp_path / 'x.mesh')])
    assert result.exit_code == 1
    assert '❌' in result.output


def test_matident_command(runner, tmp_path):
    result = runner.invoke(cli, ['matident', '--hs', '0.5,0.4,0.3', '--out', str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert '✅' in result.output
    assert 'identity_holds: True' in result.output
    assert (tmp_path / 'matident.csv').exists()


def test_config_file_is_merged(runner, tmp_path):
    config_file = tmp_path / 'run.json'
    config_file.write_text(json.dumps({'hs': [0.5, 0.4, 0.3], 'degree': 2}), encoding='utf-8')
    result = runner.invoke(cli, ['matident', '--config', str(config_file), '--out', str(tmp_path)])
    assert result.exit_code == 0, result.output
    assert '(P2)' in result.output


def test_bad_degree_fails(runner, tmp_path):
    result = runner.invoke(cli, ['converge', '--degree', '4', '--hs', '0.5,0.4,0.3', '--out', str(tmp_path)])
    assert result.exit_code == 1
    assert '❌' in result.output
    assert 'degree' in result.output


def test_flowcheck_command(runner, tmp_path):
    out = tmp_path / 'flow.csv'
    result = runner.invoke(cli, ['flowcheck', '--domain', 'disk', '--t', '0.025,0.05', '--out', str(out)])
    assert result.exit_code == 0, result.output
    with open(out, newline='', encoding='utf-8') as f:
        rows = list(csv.reader(f))
    assert rows[0] == ['t', 'min_dist', 'max_dist', 'lam', 'min_det']
    assert len(rows) == 3
