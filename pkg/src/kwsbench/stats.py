"""Simple linear regression with a two-sided slope t-test.

Student-t tail probabilities go through the regularized incomplete beta
function, evaluated with a modified Lentz continued fraction.
"""
import csv
import io
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import DegenerateInputError, TableError

_EPS = 1e-15
_TINY = 1e-300
_MAX_ITER = 500


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r_squared: float
    p_value: float
    n: int


def _betacf(a, b, x):
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _TINY:
        d = _TINY
    d = 1.0 / d
    h = d
    for m in range(1, _MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = _TINY if abs(d) < _TINY else d
        c = 1.0 + aa / c
        c = _TINY if abs(c) < _TINY else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})")


def betainc(a, b, x):
    """Regularized incomplete beta I_x(a, b) for a, b > 0 and 0 <= x <= 1."""
    if a <= 0 or b <= 0:
        raise ValueError("a and b must be positive")
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    # the fraction converges fast only below the mean; use symmetry above it
    if x < (a + 1.0) / (a + b + 2.0):
        return math.exp(log_front) * _betacf(a, b, x) / a
    return 1.0 - math.exp(log_front) * _betacf(b, a, 1.0 - x) / b


def t_sf(t, df):
    """Two-sided p-value P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if math.isinf(t):
        return 0.0
    return betainc(df / 2.0, 0.5, df / (df + t * t))


def ols(xs, ys):
    xs = [float(x) for x in xs]
    ys = [float(y) for y in ys]
    n = len(xs)
    if n != len(ys):
        raise DegenerateInputError(f"length mismatch: {n} xs vs {len(ys)} ys")
    if n < 3:
        raise DegenerateInputError(f"need at least 3 points, got {n}")
    mx, my = math.fsum(xs) / n, math.fsum(ys) / n
    dx = [x - mx for x in xs]
    dy = [y - my for y in ys]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    if sxx == 0.0:
        raise DegenerateInputError("xs have zero variance")
    slope = sxy / sxx
    intercept = my - slope * mx
    if syy == 0.0:
        # constant ys: no linear relationship to explain
        return RegressionResult(slope, intercept, 0.0, 1.0, n)
    r2 = min(1.0, sxy * sxy / (sxx * syy))
    if r2 >= 1.0:
        p = t_sf(math.inf, n - 2)
    else:
        p = t_sf(math.sqrt(r2 * (n - 2) / (1.0 - r2)), n - 2)
    # p is reported in (0, 1]; an exact fit underflows to the smallest double
    return RegressionResult(slope, intercept, r2, max(p, 5e-324), n)


def bundled_table_path():
    return resources.files("kwsbench.data").joinpath("table4.csv")


def read_table(path=None):
    """(columns, rows) of a results CSV; the bundled table when ``path`` is None."""
    text = bundled_table_path().read_text() if path is None else Path(path).read_text()
    reader = csv.DictReader(io.StringIO(text))
    rows = list(reader)
    return list(reader.fieldnames or []), rows


def correlate_table(results_csv, x_column, y_column):
    """Fit ``y_column`` on ``x_column``; returns the fit and (x, y, fitted) rows."""
    columns, rows = read_table(results_csv)
    for col in (x_column, y_column):
        if col not in columns:
            raise TableError(f"missing column {col!r}; available: {', '.join(columns)}")
    xs, ys = [], []
    for lineno, row in enumerate(rows, start=2):
        for col, out in ((x_column, xs), (y_column, ys)):
            try:
                out.append(float(row[col]))
            except (TypeError, ValueError):
                raise TableError(f"row {lineno}: non-numeric {col!r} value {row[col]!r}") from None
    fit = ols(xs, ys)
    scatter = [(x, y, fit.intercept + fit.slope * x) for x, y in zip(xs, ys)]
    return fit, scatter
