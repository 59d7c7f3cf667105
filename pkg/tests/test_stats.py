import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import special

from context_eval.stats import betainc, kde, pearson, pearson_columns, scott_bandwidth, t_two_sided_p
from oracles import pearson_direct, pearson_p_quad, t_two_sided_quad


def test_pearson_identities():
    x = [1.0, 2.0, 4.0, 7.0]
    assert pearson(x, x).r == pytest.approx(1.0, abs=1e-12)
    assert pearson(x, [-v for v in x]).r == pytest.approx(-1.0, abs=1e-12)
    assert pearson(x, x).p_value == 0.0


def test_pearson_small_example():
    x, y = [1, 2, 3], [2, 4, 7]
    r, p = pearson(x, y)
    assert r == pytest.approx(pearson_direct(x, y), abs=1e-12)
    assert p == pytest.approx(pearson_p_quad(r, 3), abs=1e-6)


@pytest.mark.parametrize("x, y", [([1, 1, 1], [1, 2, 3]), ([1, 2, 3], [5, 5, 5]), ([1, 2], [3, 4])])
def test_pearson_undefined(x, y):
    with pytest.raises(ValueError, match="undefined correlation"):
        pearson(x, y)


def test_pearson_columns_marks_undefined_with_nan():
    X = np.array([[1, 5, 0], [2, 5, 1], [3, 5, 0], [4, 5, 2]], dtype=float)
    r, p = pearson_columns(X, np.array([1.0, 2.0, 3.0, 5.0]))
    assert math.isnan(r[1]) and math.isnan(p[1])
    assert not math.isnan(r[0]) and not math.isnan(r[2])
    r, p = pearson_columns(X, np.ones(4))
    assert np.isnan(r).all()


_vec = st.lists(st.floats(-1e3, 1e3, allow_nan=False, allow_subnormal=False), min_size=3, max_size=60)


@given(_vec, st.data())
@settings(max_examples=200)
def test_pearson_matches_oracles(x, data):
    y = data.draw(st.lists(st.floats(-1e3, 1e3, allow_nan=False, allow_subnormal=False), min_size=len(x), max_size=len(x)))
    assume(np.ptp(x) > 1e-6 and np.ptp(y) > 1e-6)
    r, p = pearson(x, y)
    assert abs(r) <= 1.0 and 0.0 <= p <= 1.0
    assert r == pytest.approx(pearson_direct(x, y), abs=1e-12)
    assert p == pytest.approx(pearson_p_quad(r, len(x)), abs=1e-6)
    assert pearson(y, x).r == pytest.approx(r, abs=1e-15)


@given(_vec, st.floats(-50, 50).filter(lambda a: abs(a) > 1e-3), st.floats(-100, 100))
def test_pearson_affine(x, a, b):
    assume(np.ptp(x) > 1e-3)
    y = [a * v + b for v in x]
    assume(np.ptp(y) > 0)
    assert pearson(x, y).r == pytest.approx(math.copysign(1.0, a), abs=1e-12)


@given(st.floats(0.01, 50), st.floats(0.01, 50), st.floats(0, 1))
def test_betainc_against_scipy(a, b, x):
    assert betainc(a, b, x) == pytest.approx(special.betainc(a, b, x), abs=1e-12)


@pytest.mark.parametrize("t", [0.0, 0.3, 1.0, 2.5, 6.0, 40.0])
@pytest.mark.parametrize("df", [1, 2, 5, 30, 998])
def test_t_tail_against_quadrature(t, df):
    assert t_two_sided_p(t, df) == pytest.approx(t_two_sided_quad(t, df), abs=1e-9)


def test_tiny_p_values_do_not_cancel():
    # r close to 1 with many samples has p far below machine epsilon
    p = t_two_sided_p(60.0, 500)
    assert 0.0 < p < 1e-200


# -- KDE


def test_kde_peak_near_cluster():
    rng = np.random.default_rng(0)
    v = 0.8 + rng.normal(0, 0.01, 200)
    c = kde(v)
    assert abs(c.grid[np.argmax(c.density)] - 0.8) < c.bandwidth


def test_kde_two_point_symmetry():
    c = kde([0.0, 1.0], grid_size=501)
    assert np.allclose(c.density, c.density[::-1])
    assert c.grid[0] + c.grid[-1] == pytest.approx(1.0)


def test_kde_bandwidth_scott():
    v = np.arange(10.0)
    assert kde(v).bandwidth == pytest.approx(np.std(v, ddof=1) * 10 ** -0.2)
    assert scott_bandwidth(v) == kde(v).bandwidth


def test_kde_degenerate():
    with pytest.raises(ValueError, match="degenerate KDE"):
        kde([0.5, 0.5, 0.5])
    with pytest.raises(ValueError, match="degenerate KDE"):
        kde([0.5])
    with pytest.raises(ValueError, match="degenerate KDE"):
        kde([0.0, 5e-240])


@given(st.lists(st.floats(0, 1), min_size=2, max_size=300))
@settings(deadline=None)
def test_kde_integrates_to_one(v):
    assume(np.ptp(v) > 0 and np.std(v, ddof=1) > 1e-200)
    c = kde(v)
    assert 0.95 <= c.integral() <= 1.05
    assert (c.density >= 0).all() and (np.diff(c.grid) > 0).all()
    assert c.grid[0] == pytest.approx(min(v) - 4 * c.bandwidth)
    assert c.grid[-1] == pytest.approx(max(v) + 4 * c.bandwidth)
