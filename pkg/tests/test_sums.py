import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from movingclt.errors import PreconditionError
from movingclt.model import SamplePath, SequenceModel, VarianceRule, covariance_at, gen_path, variance_at
from movingclt.sums import (BlockScheme, Window, block_increments, block_length, block_variances,
                            exact_variance, integer_root, make_block_scheme, moving_sum,
                            prefix_variances, window_variance)


def path_of(values, first=1):
    return SamplePath(first=first, values=np.asarray(values, dtype=float), seed=0, replicate=0)


def double_sum(model, p, n):
    idx = range(p + 1, p + n + 1)
    return sum(covariance_at(model, j, h) for j in idx for h in idx)


def test_moving_sum_examples():
    path = path_of([1, 2, 3, 4, 5])
    assert moving_sum(path, Window(1, 3)) == 9
    assert moving_sum(path, Window(0, 5)) == 15
    assert moving_sum(path, Window(3, 0)) == 0


def test_moving_sum_outside_path():
    with pytest.raises(PreconditionError):
        moving_sum(path_of([1, 2, 3]), Window(2, 5))
    with pytest.raises(PreconditionError):
        Window(-1, 3)


@settings(max_examples=80, deadline=None)
@given(values=st.lists(st.integers(-1000, 1000), min_size=0, max_size=40), data=st.data())
def test_window_additivity(values, data):
    path = path_of(values)
    N = len(values)
    p = data.draw(st.integers(0, N))
    n1 = data.draw(st.integers(0, N - p))
    n2 = data.draw(st.integers(0, N - p - n1))
    assert moving_sum(path, Window(p, n1 + n2)) == moving_sum(path, Window(p, n1)) + moving_sum(path, Window(p + n1, n2))


def test_block_scheme_examples():
    assert make_block_scheme(10, 3) == BlockScheme(3, 3, 1)
    assert make_block_scheme(12) == BlockScheme(2, 6, 0)
    with pytest.raises(PreconditionError):
        make_block_scheme(5, 9)


def test_cube_root_rule_is_exact():
    assert block_length(64) == 4
    assert block_length(4096) == 16
    assert block_length(4095) == 15
    assert block_length(1000, "sqrt") == 31
    assert block_length(1000, "power:0.5") == 31
    assert block_length(100, "7") == 7


@settings(max_examples=200, deadline=None)
@given(n=st.integers(1, 10**7), k=st.integers(2, 4))
def test_integer_root(n, k):
    x = integer_root(n, k)
    assert x**k <= n < (x + 1) ** k


@settings(max_examples=100, deadline=None)
@given(n=st.integers(1, 5000), rule=st.sampled_from(["cuberoot", "sqrt", 1, 2, 3]))
def test_block_count_exactness(n, rule):
    if isinstance(rule, int) and rule > n:
        return
    s = make_block_scheme(n, rule)
    assert s.m * s.ell + s.r == n and 0 <= s.r < s.ell


def test_block_increments_examples():
    inc = block_increments(path_of([1, 2, 3, 4, 5, 6]), Window(0, 6), BlockScheme(2, 3, 0))
    assert inc.values == pytest.approx(np.array([3, 7, 11]) / math.sqrt(2), rel=1e-15)
    zero = block_increments(path_of(np.zeros(9)), Window(0, 9), BlockScheme(3, 3, 0))
    assert np.all(zero.values == 0)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**64 - 1), p=st.integers(0, 30), n=st.integers(1, 200),
       ell=st.integers(1, 20))
def test_block_reconstruction(seed, p, n, ell):
    if ell > n:
        return
    model = SequenceModel.independent("laplace")
    path = gen_path(model, 0, p + n, seed)
    w = Window(p, n)
    inc = block_increments(path, w, make_block_scheme(n, ell))
    assert math.sqrt(ell) * inc.values.sum() + inc.remainder == pytest.approx(moving_sum(path, w), abs=1e-9)


def test_window_variance_examples(ar1):
    lin = SequenceModel.independent("normal", VarianceRule("linear", 1.0))
    assert float(window_variance(lin, Window(2, 3))) == 12
    assert float(window_variance(ar1, Window(0, 2))) == pytest.approx(4.0, rel=1e-14)
    assert window_variance(ar1, Window(0, 2)).exact


@pytest.mark.parametrize("p,n", [(0, 1), (0, 7), (5, 13), (100, 30)])
def test_exact_variance_against_double_sum(ar1, ma1, p, n):
    for m in (ar1, ma1, SequenceModel.gaussian_ar1(0.9, 2.0), SequenceModel.moving_average([0.3, 1, 2, 0.5])):
        assert exact_variance(m, p, n) == pytest.approx(double_sum(m, p, n), rel=1e-12)


def test_monte_carlo_variance_within_three_se(ar1, ma1):
    for m in (ar1, ma1):
        w = Window(10, 20)
        est = window_variance(m, w, "monte-carlo", R=20000, seed=8)
        assert est.R == 20000 and est.stderr > 0
        assert abs(float(est) - exact_variance(m, 10, 20)) <= 3 * est.stderr


def test_monte_carlo_needs_replicates(ar1):
    with pytest.raises(PreconditionError):
        window_variance(ar1, Window(0, 5), "monte-carlo", R=1)


def test_associated_variance_dominates_sum_of_variances(ar1, ma1):
    for m in (ar1, ma1):
        assert exact_variance(m, 3, 50) >= sum(variance_at(m, k) for k in range(4, 54))


def test_superadditivity(ar1, ma1):
    for m in (ar1, ma1):
        w = Window(7, 103)
        s = make_block_scheme(w.n, 10)
        body = exact_variance(m, w.p, s.m * s.ell)
        rem = exact_variance(m, w.p + s.m * s.ell, s.r)
        assert exact_variance(m, w.p, w.n) >= body + rem
        assert body >= block_variances(m, Window(w.p, s.m * s.ell), BlockScheme(s.ell, s.m, 0)).sum()


def test_prefix_variances(ar1, linear_var):
    pv = prefix_variances(ar1, 12)
    assert pv[0] == 0
    for k in (1, 5, 12):
        assert pv[k] == pytest.approx(exact_variance(ar1, 0, k), rel=1e-12)
    assert prefix_variances(linear_var, 4).tolist() == [0, 1, 3, 6, 10]
