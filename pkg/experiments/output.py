"""Table writers: CSV with a slope footer, JSON, run manifest and gnuplot files."""
import csv
import hashlib
import json
import math
import os
from datetime import datetime, timezone

import numpy as np
import scipy
import triangle

from config import Config


def _cell(value):
    if value is None:
        return ''
    if isinstance(value, float):
        return f'{value:.17g}'
    return str(value)


def write_csv(table, path):
    """Rows in sweep order, then a footer row with the fitted slope of every fitted column."""
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(table.columns)
        for row in table.rows:
            writer.writerow([_cell(row.get(c)) for c in table.columns])
        footer = []
        for c in table.columns:
            if c == table.variable:
                footer.append('slope')
            elif c in table.slopes:
                footer.append(f'{table.slopes[c]:.6g}')
            else:
                footer.append('')
        writer.writerow(footer)
    return path


def _json_safe(value):
    if isinstance(value, dict):
        return {k: _json_safe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(v) for v in value]
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def write_json(table, summary, config, path):
    payload = {
        'schema_version': Config.SCHEMA_VERSION,
        'config': config.to_dict(),
        'table': table.as_dict(),
        'summary': summary,
    }
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(_json_safe(payload), f, indent=2, ensure_ascii=False)
    return path


def input_hash(config, domain_text):
    """sha256 over the canonical config JSON and the domain description."""
    digest = hashlib.sha256()
    digest.update(json.dumps(_json_safe(config.to_dict()), sort_keys=True).encode('utf-8'))
    digest.update(b'\0')
    digest.update(domain_text.encode('utf-8'))
    return digest.hexdigest()


def write_manifest(config, domain_text, outputs, path):
    manifest = {
        'schema_version': Config.SCHEMA_VERSION,
        'created_at': datetime.now(timezone.utc).isoformat(),
        'config': config.to_dict(),
        'seed': config.seed if config.seed is not None else Config.SEED,
        'input_sha256': input_hash(config, domain_text),
        'outputs': sorted(os.path.basename(p) for p in outputs),
        'versions': {'numpy': np.__version__, 'scipy': scipy.__version__,
                     'triangle': getattr(triangle, '__version__', 'unknown')},
    }
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(_json_safe(manifest), f, indent=2)
    return path


def write_gnuplot(table, directory):
    """<experiment>.dat with the numeric columns and a <experiment>.gp log-log plot script."""
    name = table.experiment
    numeric = [c for c in table.columns if c != 'error']
    data_path = os.path.join(directory, f'{name}.dat')
    with open(data_path, 'w', encoding='utf-8') as f:
        f.write('# ' + ' '.join(numeric) + '\n')
        for row in table.ok_rows:
            f.write(' '.join(_cell(row.get(c)) or 'NaN' for c in numeric) + '\n')

    column = numeric.index(table.quantity) + 1
    lines = [
        "set terminal pngcairo size 800,600",
        f"set output '{name}.png'",
        "set logscale xy",
        f"set xlabel '{table.variable}'",
        f"set ylabel '{table.quantity}'",
        "set key left top",
    ]
    plot = f"plot '{name}.dat' using 1:{column} with linespoints title '{table.quantity}'"
    if math.isfinite(table.fit.slope):
        lines.append(f'fit_line(x) = exp({table.fit.intercept!r}) * x**{table.fit.slope!r}'
                     + (' * log(2 + 1/x)' if table.fit.model == 'power_log' else ''))
        plot += f", fit_line(x) title 'slope {table.fit.slope:.3f} ({table.fit.model})'"
    lines.append(plot)
    gp_path = os.path.join(directory, f'{name}.gp')
    with open(gp_path, 'w', encoding='utf-8') as f:
        f.write('\n'.join(lines) + '\n')
    return data_path, gp_path
