import numpy as np
import pytest
from scipy import stats

from permtest.distributions import ChiSquared, chi2_quantile, make_rng, sample
from permtest.thresholds import (
    COARSE_POINTS,
    _upper_limit,
    cat_total_error,
    gauss_total_error,
    noncentral_cdf,
    noncentral_null_threshold,
    optimal_threshold_cat,
    optimal_threshold_gauss,
    worst_split,
)


def gauss_grid_oracle(k, delta, step=1e-3, upper=60.0):
    t = np.arange(step, upper + step / 2, step)
    obj = stats.chi2(k).sf(t) + stats.ncx2(k, delta**2).cdf(t)
    i = int(np.argmin(obj))
    return t[i], obj[i]


def cat_grid_oracle(k, delta, step=1e-3, upper=None):
    d2 = delta**2
    upper = upper or _upper_limit(k, delta)
    t = np.arange(step, upper + step / 2, step)
    best = np.zeros_like(t)
    for a in np.linspace(0.0, d2, 201):
        law = stats.ncx2(k - 1, a) if a > 0 else stats.chi2(k - 1)
        np.maximum(best, law.cdf(t - (d2 - a)), out=best)
    obj = stats.chi2(k - 1).sf(t) + best
    i = int(np.argmin(obj))
    return t[i], obj[i]


def test_noncentral_cdf_against_scipy():
    x = np.linspace(0.1, 40, 50)
    for df, nc in [(3, 0.0), (3, 4.0), (5, 16.0)]:
        np.testing.assert_allclose(noncentral_cdf(df, nc, x), stats.ncx2(df, nc).cdf(x) if nc else stats.chi2(df).cdf(x), atol=1e-12)
    assert noncentral_cdf(3, 2.0, -1.0) == 0.0


def test_gauss_matches_dense_grid():
    spec = optimal_threshold_gauss(5, 4.0)
    t_grid, v_grid = gauss_grid_oracle(5, 4.0)
    assert abs(spec.t_star - t_grid) < 2e-3
    assert spec.total_error <= v_grid + 1e-12
    assert 0 < spec.total_error <= 1


def test_gauss_local_optimality():
    for k, delta in [(2, 1.5), (5, 4.0), (10, 6.0)]:
        spec = optimal_threshold_gauss(k, delta)
        around = gauss_total_error(k, delta, [spec.t_star - 0.01, spec.t_star + 0.01])
        assert np.all(spec.total_error <= around)


def test_gauss_beats_coarse_grid():
    k, delta = 6, 3.0
    spec = optimal_threshold_gauss(k, delta)
    upper = _upper_limit(k, delta)
    grid = np.linspace(upper / COARSE_POINTS, upper, COARSE_POINTS)
    assert spec.total_error <= gauss_total_error(k, delta, grid).min() + 1e-15


def test_gauss_tiny_delta_has_error_near_one():
    assert optimal_threshold_gauss(5, 1e-3).total_error > 0.99


def test_total_error_decreasing_in_delta():
    for k in (3, 6):
        errs = [optimal_threshold_gauss(k, d).total_error for d in (1, 2, 4, 8)]
        assert all(a > b for a, b in zip(errs, errs[1:]))
        errs = [optimal_threshold_cat(k, d).total_error for d in (1, 2, 4, 8)]
        assert all(a > b for a, b in zip(errs, errs[1:]))


def test_invalid_arguments():
    with pytest.raises(ValueError):
        optimal_threshold_gauss(1, 1.0)
    with pytest.raises(ValueError):
        optimal_threshold_cat(4, 0.0)


def test_cat_matches_nested_grid():
    spec = optimal_threshold_cat(4, 3.0)
    t_grid, v_grid = cat_grid_oracle(4, 3.0)
    assert abs(spec.t_star - t_grid) < 5e-3
    assert spec.total_error == pytest.approx(v_grid, abs=1e-6)


def test_worst_split_dominates_endpoints_and_infimum():
    k, delta = 4, 3.0
    d2 = delta**2
    for t in (2.0, 5.7, 12.0):
        a_star, sup = worst_split(k, delta, t)
        grid = np.linspace(0.0, d2, 201)
        values = noncentral_cdf(k - 1, grid, t - (d2 - grid))
        # delta_1 = 0 endpoint: P(chi2_{k-1} <= t - delta^2).
        endpoint = stats.chi2(k - 1).cdf(t - d2)
        assert values[0] == pytest.approx(endpoint, abs=1e-12)
        assert sup >= values.max() - 1e-15
        assert sup >= endpoint
        assert sup >= values.min()
        assert 0.0 <= a_star <= d2


def test_cat_total_error_vectorized():
    t = np.array([3.0, 6.0])
    out = cat_total_error(4, 2.0, t)
    assert out.shape == (2,)
    assert out[0] == pytest.approx(cat_total_error(4, 2.0, 3.0)[0])


def test_noncentral_null_threshold_reduces_to_central():
    for k in (2, 5, 8):
        assert noncentral_null_threshold(k, 0.0, 0.05) == pytest.approx(chi2_quantile(ChiSquared(k), 0.05), abs=1e-8)


def test_noncentral_null_threshold_increasing():
    values = [noncentral_null_threshold(6, tau, 0.05) for tau in (0.0, 0.5, 1.0, 2.0, 5.0, 10.0)]
    assert all(a < b for a, b in zip(values, values[1:]))
    with pytest.raises(ValueError):
        noncentral_null_threshold(6, -1.0, 0.05)


def test_noncentral_null_threshold_monte_carlo():
    q = noncentral_null_threshold(6, 2.0, 0.05)
    draws = sample(ChiSquared(6, 2.0), make_rng(12), 10**6)
    assert 0.047 <= np.mean(draws > q) <= 0.053
