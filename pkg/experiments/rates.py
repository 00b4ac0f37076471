"""Log-log rate fits for sweep tables."""
import logging
import math
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional, Tuple

import numpy as np
from scipy import stats

logger = logging.getLogger(__name__)

POWER = 'power'
POWER_LOG = 'power_log'


class Fit(NamedTuple):
    slope: float
    intercept: float
    band: Tuple[float, float]
    r2: float
    model: str
    points: int

    def as_dict(self):
        out = self._asdict()
        out['band'] = list(self.band)
        return out


NO_FIT = Fit(math.nan, math.nan, (math.nan, math.nan), math.nan, POWER, 0)


def log_factor(h):
    return np.log(2.0 + 1.0 / np.asarray(h, dtype=float))


def fit_power(xs, values, model=POWER, min_points=3):
    """
    Least-squares fit of log(value) = p log(x) + c. The power_log model fits
    value = C x^p ln(2 + 1/x) instead. The band is the 95% confidence
    interval of the slope.
    """
    xs, values = np.asarray(xs, dtype=float), np.asarray(values, dtype=float)
    keep = np.isfinite(values) & (values > 0.0) & np.isfinite(xs) & (xs > 0.0)
    n = int(keep.sum())
    if n < min_points:
        return NO_FIT._replace(model=model, points=n)
    y = np.log(values[keep])
    if model == POWER_LOG:
        y = y - np.log(log_factor(xs[keep]))
    res = stats.linregress(np.log(xs[keep]), y)
    if n > 2:
        half = stats.t.ppf(0.975, n - 2) * res.stderr
    else:
        half = math.nan
    return Fit(float(res.slope), float(res.intercept), (float(res.slope - half), float(res.slope + half)),
               float(res.rvalue ** 2), model, n)


def best_fit(xs, values, with_log=False):
    """Plain power fit, or the better (by r^2) of power and power_log."""
    plain = fit_power(xs, values, POWER)
    if not with_log:
        return plain
    logged = fit_power(xs, values, POWER_LOG)
    if not math.isfinite(plain.r2):
        return logged
    return logged if logged.r2 > plain.r2 else plain


@dataclass
class RateTable:
    experiment: str
    variable: str
    quantity: str
    columns: Tuple[str, ...]
    rows: List[dict] = field(default_factory=list)
    fit_columns: Tuple[str, ...] = ()
    with_log: bool = False
    fit: Optional[Fit] = None
    slopes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda row: -row[self.variable])
        self.refit()

    def values(self, column, only_ok=True):
        return np.array([row.get(column, math.nan) if not (only_ok and row.get('error')) else math.nan
                         for row in self.rows], dtype=float)

    @property
    def xs(self):
        return np.array([row[self.variable] for row in self.rows], dtype=float)

    @property
    def ok_rows(self):
        return [row for row in self.rows if not row.get('error')]

    def refit(self):
        if self.quantity in self.fit_columns:
            self.fit = best_fit(self.xs, self.values(self.quantity), self.with_log)
            if self.fit.points < 3:
                logger.warning('%s: only %d finite rows, no slope fitted', self.experiment, self.fit.points)
        else:
            self.fit = NO_FIT
        self.slopes = {}
        for column in self.fit_columns:
            if column == self.quantity:
                self.slopes[column] = self.fit.slope
            else:
                self.slopes[column] = fit_power(self.xs, self.values(column)).slope
        return self

    @property
    def slope(self):
        return self.fit.slope

    @property
    def band(self):
        return self.fit.band

    @property
    def model(self):
        return self.fit.model

    def finest_slope(self, column=None):
        """Two-point slope of a column between its two finest successful rows."""
        column = column or self.quantity
        xs, v = self.xs, self.values(column)
        keep = np.isfinite(v) & (v > 0.0)
        if keep.sum() < 2:
            return math.nan
        (x0, x1), (v0, v1) = xs[keep][-2:], v[keep][-2:]
        if self.with_log and column == self.quantity and self.model == POWER_LOG:
            v0, v1 = v0 / log_factor(x0), v1 / log_factor(x1)
        return float(math.log(v0 / v1) / math.log(x0 / x1))

    def spread(self, column=None):
        """max / min of a column over the successful rows."""
        v = self.values(column or self.quantity)
        v = v[np.isfinite(v)]
        if not len(v) or v.min() <= 0.0:
            return math.nan
        return float(v.max() / v.min())

    def as_dict(self):
        return {
            'experiment': self.experiment,
            'variable': self.variable,
            'quantity': self.quantity,
            'columns': list(self.columns),
            'rows': self.rows,
            'fit': self.fit.as_dict(),
            'slopes': self.slopes,
        }
