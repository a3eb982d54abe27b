import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from movingclt.conditions import ScalingFunction, scaling_ratio
from movingclt.errors import PreconditionError
from movingclt.model import SequenceModel, covariance_matrix
from movingclt.sums import Window
from movingclt.weakconv import (cf_slack, cvm_to_normal, diagonal_points, ecf,
                                fdd_covariance_check, fdd_ensemble, gaussian_newman_gap,
                                increment_covariance, increment_decoupling_check,
                                increment_decoupling_gap, increments, ks_cutoff, ks_to_normal,
                                mc_normalized_sums, min_target, newman_bound, newman_verify)

plotting = stats.norm.ppf((np.arange(1, 101) - 0.5) / 100)


def test_mc_normalized_sums_shape_and_mean(iid_normal):
    ens = mc_normalized_sums(iid_normal, Window(7, 30), 3000, seed=1)
    assert ens.values.shape == (3000, 1) and np.all(np.isfinite(ens.values))
    assert abs(ens.column().mean()) <= 3 / math.sqrt(3000)
    assert ens.provenance["seed"] == 1 and ens.provenance["n"] == 30


def test_mc_normalized_sums_zero_variance():
    with pytest.raises(PreconditionError):
        mc_normalized_sums(SequenceModel.independent("normal", 0.0), Window(0, 5), 10, seed=0)


def test_mc_normalized_sums_regenerate_identically(ar1):
    a = mc_normalized_sums(ar1, Window(5, 64), 700, seed=4, workers=1)
    b = mc_normalized_sums(ar1, Window(5, 64), 700, seed=4, workers=3)
    assert np.array_equal(a.values, b.values)


# --- KS / CvM --------------------------------------------------------------------

def test_ks_examples():
    assert ks_to_normal(plotting) == pytest.approx(0.005, abs=1e-12)
    assert ks_to_normal(np.zeros(10)) == 0.5
    with pytest.raises(PreconditionError):
        ks_to_normal(np.array([]))


def test_cvm_examples():
    assert cvm_to_normal(plotting) == pytest.approx(1 / 1200, rel=1e-9)
    assert cvm_to_normal(np.zeros(10)) > 0.05


@settings(max_examples=60, deadline=None)
@given(x=st.lists(st.floats(-6, 6), min_size=1, max_size=200), seed=st.integers(0, 2**32 - 1))
def test_ks_cvm_match_scipy_and_are_permutation_invariant(x, seed):
    x = np.array(x)
    perm = np.random.default_rng(seed).permutation(x)
    ks, cvm = ks_to_normal(x), cvm_to_normal(x)
    assert ks == ks_to_normal(perm) and cvm == pytest.approx(cvm_to_normal(perm), rel=1e-12, abs=1e-15)
    assert 0 <= ks <= 1 and cvm >= 0
    assert ks == pytest.approx(stats.kstest(x, "norm").statistic, abs=1e-12)
    if x.size > 1:
        assert cvm == pytest.approx(stats.cramervonmises(x, "norm").statistic, rel=1e-9, abs=1e-12)


def test_cutoffs():
    assert ks_cutoff(2000) == pytest.approx(1.5 * 1.36 / math.sqrt(2000))
    assert cf_slack(10**4) == pytest.approx(0.06)


# --- characteristic functions --------------------------------------------------

def test_ecf_examples(iid_normal):
    z = ecf(np.zeros(50), [0.0, 1.0, -3.0])
    assert np.all(z.values == 1 + 0j)
    ens = mc_normalized_sums(iid_normal, Window(0, 10), 20000, seed=2)
    psi = ecf(ens, [0.0, 1.0]).values
    assert psi[0] == 1.0
    assert abs(psi[1] - math.exp(-0.5)) <= 3 / math.sqrt(20000)


@settings(max_examples=40, deadline=None)
@given(x=st.lists(st.floats(-50, 50), min_size=1, max_size=100), t=st.floats(-10, 10))
def test_ecf_hermitian_and_bounded(x, t):
    v = ecf(np.array(x), [t, -t, 0.0]).values
    assert abs(v[0]) <= 1 + 1e-12
    assert v[1] == pytest.approx(np.conj(v[0]), abs=1e-12)
    assert v[2] == 1.0


def test_ecf_vector_points(ar1):
    x = np.random.default_rng(0).standard_normal((500, 3))
    v = ecf(x, np.array([[0.0, 0.0, 0.0], [1.0, -1.0, 0.5]])).values
    assert v[0] == 1.0
    assert v[1] == pytest.approx(np.mean(np.exp(1j * x @ np.array([1.0, -1.0, 0.5]))))


# --- Newman --------------------------------------------------------------------

def test_newman_bivariate_gaussian_exact():
    cov = np.array([[1.0, 0.5], [0.5, 1.0]])
    t = np.array([[1.0, 1.0]])
    gap = gaussian_newman_gap(cov, t)[0]
    assert gap == pytest.approx(abs(math.exp(-1.5) - math.exp(-1.0)), rel=1e-14)
    assert newman_bound(cov, t)[0] == 0.5
    assert gap <= 0.5


def test_newman_independent(iid_normal):
    rep = newman_verify(iid_normal, [1, 2, 3], R=4000, seed=1)
    assert np.all(rep.bound == 0) and np.all(rep.exact_gap == 0)
    assert rep.verdict


def test_newman_associated_models(ar1, ma1):
    for m in (ar1, ma1, SequenceModel.gaussian_ar1(0.25)):
        rep = newman_verify(m, range(3, 7), R=5000, seed=2)
        assert rep.verdict
        if rep.exact_gap is not None:
            assert np.all(rep.exact_gap <= rep.bound)


def test_newman_uncertified_raises():
    with pytest.raises(PreconditionError):
        newman_verify(SequenceModel.gaussian_matrix([[1, -0.3], [-0.3, 1]]), [1, 2], R=100)


def test_newman_random_points_exact_gaussian(ar1):
    pts = np.random.default_rng(5).uniform(-2, 2, (50, 4))
    cov = covariance_matrix(ar1, np.arange(1, 5), np.arange(1, 5))
    assert np.all(gaussian_newman_gap(cov, pts) <= newman_bound(cov, pts) + 1e-15)
    assert diagonal_points(4).shape == (8, 4)


# --- finite-dimensional distributions ------------------------------------------

def test_fdd_single_point_is_normalized_sum(iid_normal):
    f = fdd_ensemble(iid_normal, 64, [1.0], 500, seed=3)
    m = mc_normalized_sums(iid_normal, Window(0, 64), 500, seed=3)
    assert np.allclose(f.values, m.values, rtol=1e-12, atol=1e-12)


def test_fdd_increments_telescope(ar1):
    f = fdd_ensemble(ar1, 100, [0.2, 0.5, 1.0], 300, seed=1)
    assert np.allclose(np.cumsum(increments(f), axis=1), f.values, atol=1e-12)


def test_fdd_target_examples():
    M = min_target(lambda t: t, (0.25, 0.5, 1.0))
    assert M.tolist() == [[0.25, 0.25, 0.25], [0.25, 0.5, 0.5], [0.25, 0.5, 1.0]]
    assert min_target(lambda t: t, (1.0,)).tolist() == [[1.0]]


@settings(max_examples=40, deadline=None)
@given(vals=st.lists(st.floats(0, 10), min_size=1, max_size=8))
def test_min_target_is_psd(vals):
    v = np.sort(np.array(vals))
    grid = tuple(np.linspace(0.1, 1.0, v.size))
    a = ScalingFunction(grid, tuple(v.tolist()), "test")
    M = min_target(a, grid)
    assert np.array_equal(M, M.T)
    assert np.min(np.linalg.eigvalsh(M)) >= -1e-9 * max(1.0, v.max())


def test_fdd_covariance_linear_variance(linear_var):
    grid = (0.25, 0.5, 1.0)
    ens = fdd_ensemble(linear_var, 4096, grid, 4000, seed=12)
    rep = fdd_covariance_check(ens, ScalingFunction.analytic(lambda t: t * t, grid))
    assert rep.max_deviation <= 0.05


def test_fdd_associated_coordinates_nonnegatively_correlated(ar1):
    R = 4000
    ens = fdd_ensemble(ar1, 256, (0.25, 0.5, 1.0), R, seed=6)
    c = np.cov(ens.values.T)
    assert np.all(c >= -3 / math.sqrt(R))


def test_fdd_grid_mismatch(iid_normal):
    ens = fdd_ensemble(iid_normal, 64, (0.5, 1.0), 100, seed=0)
    with pytest.raises(PreconditionError):
        fdd_covariance_check(ens, scaling_ratio(iid_normal, 64, (0.25, 1.0)))
    with pytest.raises(PreconditionError):
        fdd_ensemble(iid_normal, 64, (0.5, 0.25), 10, seed=0)


def test_decoupling(iid_normal, ar1):
    grid = (0.25, 0.5, 1.0)
    ens = fdd_ensemble(iid_normal, 256, grid, 4000, seed=2)
    assert increment_decoupling_gap(ens, (1, 1, 1), [1.0]) <= cf_slack(4000)
    one = fdd_ensemble(iid_normal, 64, (1.0,), 200, seed=2)
    assert increment_decoupling_gap(one, (1.0,), [0.5, 1.0, 2.0]) == 0.0
    rep = increment_decoupling_check(ar1, 4096, grid, (1, 1, 1), points=[1.0], R=4000, seed=9)
    assert rep.verdict
    cov = increment_covariance(ar1, 4096, grid)
    assert rep.bound[0] == pytest.approx(0.5 * (cov.sum() - np.trace(cov)))
