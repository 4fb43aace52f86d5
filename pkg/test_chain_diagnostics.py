"""Tests for IACT, effective sample size and cross-level covariance estimates."""

import numpy as np
import pytest
from scipy.signal import lfilter

from chain_diagnostics import (
    autocorrelation,
    batch_means,
    cross_level_ratio,
    effective_sample_size,
    iact,
    mean_iact,
    variance_decomposition,
)
from sampler_errors import UsageError


def ar1(rho, size, seed):
    noise = np.random.default_rng(seed).standard_normal(size)
    return lfilter([1.0], [1.0, -rho], noise)


def test_autocorrelation_starts_at_one(rng):
    rho = autocorrelation(rng.standard_normal(500))
    assert rho[0] == pytest.approx(1.0)
    assert np.all(np.abs(rho[1:20]) < 0.2)


def test_independent_series_has_unit_iact(rng):
    result = iact(rng.standard_normal(20_000))
    assert result.tau == pytest.approx(1.0, abs=0.1)
    assert effective_sample_size(rng.standard_normal(20_000)) == pytest.approx(20_000, rel=0.1)


@pytest.mark.parametrize(
    "rho, size",
    [
        (0.5, 100_000),
        (0.9, 500_000),
        # window W >= 5 tau needs about 1000 lags here
        pytest.param(0.99, 4_000_000, marks=pytest.mark.slow),
    ],
)
def test_ar1_series_matches_closed_form(rho, size):
    result = iact(ar1(rho, size, seed=3))
    assert result.tau == pytest.approx((1 + rho) / (1 - rho), rel=0.1)
    assert 5 * result.tau <= result.window < size // 10


def test_short_series_is_rejected():
    with pytest.raises(UsageError):
        iact(np.zeros(99))


def test_constant_series_is_degenerate():
    result = iact(np.full(150, 2.5))
    assert result.degenerate
    assert result.tau == 1.0


def test_iact_is_affine_invariant():
    series = ar1(0.7, 5_000, seed=5)
    assert iact(3.0 * series - 7.0).tau == pytest.approx(iact(series).tau, rel=1e-10)


def test_mean_iact_over_components():
    traces = np.column_stack([ar1(0.5, 10_000, seed=1), ar1(0.5, 10_000, seed=2)])
    expected = np.mean([iact(traces[:, 0]).tau, iact(traces[:, 1]).tau])
    assert mean_iact(traces) == pytest.approx(expected)
    assert np.isnan(mean_iact(np.zeros((200, 0))))


def test_variance_decomposition_identity(rng):
    coarse = rng.standard_normal(1_000)
    fine = 0.8 * coarse + 0.3 * rng.standard_normal(1_000)
    decomposition = variance_decomposition(fine, coarse)
    assert decomposition.variance_d == pytest.approx(decomposition.decomposed, rel=1e-10)
    assert 0.9 < decomposition.correlation <= 1.0


def test_batch_means_drop_the_remainder():
    np.testing.assert_allclose(batch_means(np.arange(10.0), 3), [1.0, 4.0, 7.0])
    with pytest.raises(UsageError):
        batch_means(np.arange(5.0), 10)


def test_identical_levels_have_unit_ratio(rng):
    batches = batch_means(rng.standard_normal(4_000), 40)
    result = cross_level_ratio([batches, batches])
    assert result.max_ratio == pytest.approx(1.0)
    assert not result.bound_applies


def test_independent_levels_have_small_ratio():
    first = batch_means(np.random.default_rng(1).standard_normal(40_000), 400)
    second = batch_means(np.random.default_rng(2).standard_normal(40_000), 400)
    result = cross_level_ratio([first, second])
    assert result.bound_applies
    assert result.max_ratio < 0.2


def test_cross_level_ratio_needs_enough_batches(rng):
    with pytest.raises(UsageError):
        cross_level_ratio([rng.standard_normal(10), rng.standard_normal(10)])
