#!/usr/bin/env python3
"""
Command-line entry point.

    python app.py <experiment> --domain D --degree r --hs 0.2,0.1,0.05,0.025 --seed 42 --out DIR
    python app.py meshgen --domain disk --h 0.1 --out disk.mesh
    python app.py flowcheck --domain lens --t 0.0125,0.025,0.05 --out flow.csv
"""
import csv
import json
import logging
import math
import os
import sys

import click

from config import Config
from domains import resolve_domain
from errors import IsoparError
from experiments import EXPERIMENTS, run_experiment
from flowmap import build_field, verify_sandwich
from forms import parse_floats, validate_config
from meshgen import generate, validate, write_mesh


def _configure_logging(verbose):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )


def _fail(error):
    click.echo(f'❌ {error}', err=True)
    sys.exit(1)


@click.group()
@click.option('--verbose', is_flag=True, help='Debug logging.')
def cli(verbose):
    """Isoparametric finite element experiments."""
    _configure_logging(verbose)


def _format(value):
    if isinstance(value, float):
        return 'nan' if math.isnan(value) else f'{value:.4g}'
    return str(value)


def _experiment_command(name):
    @click.command(name, help=(EXPERIMENTS[name].__doc__ or '').strip().splitlines()[0])
    @click.option('--domain', default=None, help='disk, lens or flower.')
    @click.option('--domain-file', type=click.Path(exists=True, dir_okay=False), default=None,
                  help='Custom domain file (overrides --domain).')
    @click.option('--degree', type=int, default=None, help='Polynomial degree r (1-3).')
    @click.option('--hs', default=None, help='Comma-separated decreasing mesh sizes.')
    @click.option('--ts', default=None, help='Comma-separated flow times (flow experiment).')
    @click.option('--seed', type=int, default=None)
    @click.option('--out', default=None, help='Output directory.')
    @click.option('--quadrature-degree', type=int, default=None)
    @click.option('--method', type=click.Choice(['cg', 'dense']), default=None)
    @click.option('--dump-matrix', is_flag=True, help='Write assembled matrices as "i j value" text.')
    @click.option('--config', 'config_file', type=click.Path(exists=True, dir_okay=False), default=None,
                  help='JSON file mirroring the experiment configuration.')
    def command(domain, domain_file, degree, hs, ts, seed, out, quadrature_degree, method, dump_matrix,
                config_file):
        data = {'domain': 'disk', 'degree': 1, 'hs': list(Config.DEFAULT_HS)}
        if config_file:
            with open(config_file, 'r', encoding='utf-8') as f:
                data.update(json.load(f))
        overrides = {'domain': domain_file or domain, 'degree': degree, 'hs': hs, 'ts': ts, 'seed': seed,
                     'out': out, 'quadrature_degree': quadrature_degree, 'method': method}
        data.update({k: v for k, v in overrides.items() if v is not None})
        if dump_matrix:
            data['dump_matrix'] = True
        data['experiment'] = name

        try:
            config = validate_config(data)
            click.echo(f'Running {name} on {config.domain} (P{config.degree})...')
            result = run_experiment(config)
        except IsoparError as e:
            _fail(e)

        table = result.table
        click.echo(' '.join(f'{c:>14}' for c in table.columns if c != 'error'))
        for row in table.rows:
            click.echo(' '.join(f'{_format(row.get(c)):>14}' for c in table.columns if c != 'error'))
            if row.get('error'):
                click.echo(f'⚠️  {table.variable}={row[table.variable]}: {row["error"]}')
        if not math.isnan(table.slope):
            lo, hi = table.band
            click.echo(f'slope {table.slope:.3f} [{lo:.3f}, {hi:.3f}] ({table.model})')
        for key, value in result.summary.items():
            if key not in ('slope', 'band', 'model'):
                click.echo(f'   {key}: {value}')
        click.echo(f'✅ Wrote {len(result.paths)} files to {config.output_dir}')

    return command


for _name in EXPERIMENTS:
    cli.add_command(_experiment_command(_name))


@cli.command('meshgen')
@click.option('--domain', default='disk')
@click.option('--domain-file', type=click.Path(exists=True, dir_okay=False), default=None)
@click.option('--h', 'h_target', type=float, required=True)
@click.option('--seed', type=int, default=None)
@click.option('--out', required=True, type=click.Path(dir_okay=False))
def meshgen_command(domain, domain_file, h_target, seed, out):
    """Generate, validate and write a mesh."""
    try:
        entry = resolve_domain(domain_file or domain)
        mesh = generate(entry.polygon, h_target, seed=seed)
    except IsoparError as e:
        _fail(e)
    report = validate(mesh)
    write_mesh(mesh, out)
    c = report.counts
    click.echo(f'✅ {out}: {c["vertices"]} vertices, {c["triangles"]} triangles, '
               f'{c["boundary_edges"]} boundary edges, h={mesh.h:.4g}')
    click.echo(f'   min angle {report.min_angle:.2f} deg, quasi-uniformity {report.quasi_uniformity:.3f}')


@cli.command('flowcheck')
@click.option('--domain', default='disk')
@click.option('--domain-file', type=click.Path(exists=True, dir_okay=False), default=None)
@click.option('--t', 'ts', default='0.0125,0.025,0.05')
@click.option('--out', required=True, type=click.Path(dir_okay=False))
def flowcheck_command(domain, domain_file, ts, out):
    """Verify the flow-map sandwich and write the per-t report as CSV."""
    try:
        times = parse_floats(ts)
        field_ = build_field(resolve_domain(domain_file or domain).polygon)
        report = verify_sandwich(field_, times)
    except (IsoparError, ValueError) as e:
        _fail(e)
    columns = ('t', 'min_dist', 'max_dist', 'lam', 'min_det')
    directory = os.path.dirname(os.path.abspath(out))
    os.makedirs(directory, exist_ok=True)
    with open(out, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in report.rows:
            writer.writerow([f'{row[c]:.17g}' for c in columns])
    marker = '✅' if report.ok else '⚠️ '
    click.echo(f'{marker} lambda={report.lam:.4f} min det={report.min_det:.4f} '
               f'c={report.outward_constant:.4f} -> {out}')


if __name__ == '__main__':
    cli()
