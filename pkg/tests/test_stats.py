import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from kwsbench import stats
from kwsbench.errors import DegenerateInputError, TableError


def t_two_sided_by_quadrature(t, df):
    """Oracle: 2 * integral of the Student-t density from |t| to infinity."""
    log_norm = math.lgamma((df + 1) / 2) - math.lgamma(df / 2) - 0.5 * math.log(df * math.pi)

    def density(u):
        return math.exp(log_norm - (df + 1) / 2 * math.log1p(u * u / df))

    tail, _ = integrate.quad(density, abs(t), math.inf, epsabs=1e-14, epsrel=1e-12)
    return 2 * tail


def test_exact_line():
    fit = stats.ols([0, 1, 2], [0, 1, 2])
    assert fit.slope == pytest.approx(1) and fit.intercept == pytest.approx(0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1) and fit.n == 3


def test_t_sf_limits():
    assert stats.t_sf(0.0, 5) == 1.0
    assert stats.t_sf(math.inf, 5) == 0.0
    assert stats.t_sf(1e6, 5) < 1e-20


def test_t_sf_at_11_6_df5():
    p = stats.t_sf(11.6, 5)
    assert p == pytest.approx(t_two_sided_by_quadrature(11.6, 5), abs=1e-8)
    assert 0.5e-4 < p < 2e-4


@pytest.mark.parametrize("df", [1, 2, 3, 5, 10, 30, 100])
@pytest.mark.parametrize("t", [0.1, 0.7, 1.5, 2.5, 4.0, 9.0])
def test_t_sf_against_quadrature(t, df):
    assert stats.t_sf(t, df) == pytest.approx(t_two_sided_by_quadrature(t, df), abs=1e-8)


@settings(max_examples=200, deadline=None)
@given(a=st.floats(0.05, 60), b=st.floats(0.05, 60), x=st.floats(0, 1))
def test_betainc_against_scipy(a, b, x):
    assert stats.betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(df=st.integers(1, 50), t1=st.floats(0, 50), t2=st.floats(0, 50))
def test_p_monotone_in_abs_t(df, t1, t2):
    lo, hi = sorted((t1, t2))
    assert stats.t_sf(hi, df) <= stats.t_sf(lo, df)
    assert stats.t_sf(-hi, df) == stats.t_sf(hi, df)


def test_degenerate_inputs():
    with pytest.raises(DegenerateInputError, match="zero variance"):
        stats.ols([1, 1, 1], [1, 2, 3])
    with pytest.raises(DegenerateInputError):
        stats.ols([1, 2], [1, 2])
    with pytest.raises(DegenerateInputError):
        stats.ols([1, 2, 3], [1, 2])


point_lists = st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)),
                       min_size=3, max_size=30)


def _spread(values):
    return max(values) - min(values) > 1e-3 * max(1.0, max(abs(v) for v in values))


@settings(max_examples=150, deadline=None)
@given(points=point_lists, a=st.floats(0.1, 100) | st.floats(-100, -0.1), b=st.floats(-1e3, 1e3))
def test_r2_affine_invariance_and_symmetry(points, a, b):
    xs, ys = zip(*points)
    if not (_spread(xs) and _spread(ys)):
        return
    base = stats.ols(xs, ys).r_squared
    assert 0.0 <= base <= 1.0
    assert stats.ols([a * x + b for x in xs], ys).r_squared == pytest.approx(base, abs=1e-9)
    assert stats.ols(xs, [a * y + b for y in ys]).r_squared == pytest.approx(base, abs=1e-9)
    assert stats.ols(ys, xs).r_squared == pytest.approx(base, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(n=st.integers(5, 40), slope=st.floats(0.1, 10) | st.floats(-10, -0.1),
       intercept=st.floats(-100, 100), seed=st.integers(0, 2**32 - 1))
def test_points_on_a_line(n, slope, intercept, seed):
    xs = np.random.default_rng(seed).uniform(-50, 50, n)
    fit = stats.ols(xs, slope * xs + intercept)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-9)
    assert 0 < fit.p_value < 1e-6


def test_p_value_range(rng):
    for _ in range(50):
        fit = stats.ols(rng.standard_normal(8), rng.standard_normal(8))
        assert 0 < fit.p_value <= 1


def test_constant_ys():
    fit = stats.ols([1, 2, 3, 4], [5, 5, 5, 5])
    assert fit.slope == 0 and fit.r_squared == 0 and fit.p_value == 1


def test_bundled_table_multiplies_energy():
    fit, scatter = stats.correlate_table(None, "multiplies", "energy")
    assert fit.n == 7 and fit.r_squared == pytest.approx(0.964, abs=0.01)
    assert len(scatter) == 7
    x, y, fitted = scatter[0]
    assert fitted == pytest.approx(fit.intercept + fit.slope * x)


def test_bundled_table_accuracy_energy():
    fit, _ = stats.correlate_table(None, "accuracy", "energy")
    assert fit.r_squared == pytest.approx(0.892, abs=0.01)


def test_bundled_table_multiplies_latency():
    assert stats.correlate_table(None, "multiplies", "latency")[0].r_squared == \
        pytest.approx(0.886, abs=0.01)


def test_bundled_table_params_energy():
    assert stats.correlate_table(None, "params", "energy")[0].r_squared == \
        pytest.approx(0.750, abs=0.01)


def test_missing_column(tmp_path):
    path = tmp_path / "one.csv"
    path.write_text("x\n1\n2\n3\n")
    with pytest.raises(TableError, match="missing column 'y'"):
        stats.correlate_table(path, "x", "y")


def test_non_numeric_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n1,2\n2,oops\n3,4\n")
    with pytest.raises(TableError, match="row 3"):
        stats.correlate_table(path, "x", "y")
