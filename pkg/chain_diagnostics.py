"""Autocorrelation, effective sample size and cross-level covariance estimates."""

import logging
from typing import Sequence

import numpy as np
from scipy import fft

from data_class.AutocorrResult import AutocorrResult
from data_class.CoupledChainRecord import CoupledChainRecord
from data_class.CrossLevelCovariance import CrossLevelCovariance
from data_class.VarianceDecomposition import VarianceDecomposition
from sampler_errors import UsageError

logger = logging.getLogger(__name__)

MIN_SERIES_LENGTH = 100
MIN_BATCHES = 20
WINDOW_FACTOR = 5.0


def autocorrelation(series: np.ndarray) -> np.ndarray:
    """Normalised autocorrelation rho(k), k = 0..n-1, via a zero-padded FFT."""
    x = np.asarray(series, dtype=float)
    n = x.shape[0]
    centred = x - x.mean()
    size = fft.next_fast_len(2 * n)
    spectrum = fft.rfft(centred, size)
    autocov = fft.irfft(spectrum * np.conj(spectrum), size)[:n]
    return autocov / autocov[0]


def iact(series: np.ndarray) -> AutocorrResult:
    """tau = 1 + 2 sum_{k=1}^{W} rho(k) with the smallest W satisfying W >= 5 tau(W).

    Raises:
        UsageError: Fewer than 100 values.
    """
    x = np.asarray(series, dtype=float).reshape(-1)
    n = x.shape[0]
    if n < MIN_SERIES_LENGTH:
        raise UsageError(f"IACT needs at least {MIN_SERIES_LENGTH} values, got {n}")
    if np.ptp(x) == 0:
        return AutocorrResult(1.0, 0, np.ones(1), n, degenerate=True)

    rho = autocorrelation(x)
    taus = 2.0 * np.cumsum(rho) - 1.0
    windows = np.arange(n)
    satisfied = np.flatnonzero(windows >= WINDOW_FACTOR * taus)
    if satisfied.size:
        window = int(satisfied[0])
    else:
        window = n - 1
        logger.warning(f"No IACT window satisfies W >= {WINDOW_FACTOR:g} tau for a series of {n}")
    tau = max(1.0, float(taus[window]))
    return AutocorrResult(tau, window, rho[: window + 1].copy(), n)


def effective_sample_size(series: np.ndarray) -> float:
    return iact(series).effective_sample_size


def mean_iact(traces: np.ndarray) -> float:
    """Average IACT over the columns of a (steps x components) trace."""
    traces = np.asarray(traces, dtype=float)
    if traces.ndim == 1:
        traces = traces[:, None]
    if traces.shape[1] == 0:
        return float("nan")
    return float(np.mean([iact(traces[:, k]).tau for k in range(traces.shape[1])]))


def variance_of_d(record: CoupledChainRecord) -> VarianceDecomposition:
    """Sample variance of D_l with the fine/coarse decomposition (ddof=1 throughout)."""
    return variance_decomposition(record.fine_qois, record.coarse_qois)


def variance_decomposition(fine_qois: np.ndarray, coarse_qois: np.ndarray) -> VarianceDecomposition:
    fine = np.asarray(fine_qois, dtype=float)
    coarse = np.asarray(coarse_qois, dtype=float)
    if fine.shape[0] < 2:
        raise UsageError("Variance of D needs at least two samples")
    covariance = np.cov(fine, coarse, ddof=1)
    return VarianceDecomposition(
        variance_d=float(np.var(fine - coarse, ddof=1)),
        variance_fine=float(covariance[0, 0]),
        variance_coarse=float(covariance[1, 1]),
        covariance=float(covariance[0, 1]),
    )


def batch_means(series: np.ndarray, num_batches: int) -> np.ndarray:
    """Means of ``num_batches`` contiguous equal segments; the remainder is dropped."""
    x = np.asarray(series, dtype=float)
    size = x.shape[0] // num_batches
    if size == 0:
        raise UsageError(f"Cannot split {x.shape[0]} values into {num_batches} batches")
    return x[: size * num_batches].reshape(num_batches, size).mean(axis=1)


def cross_level_ratio(batched: Sequence[np.ndarray]) -> CrossLevelCovariance:
    """Covariance of per-level batch means and Cov(Y_l, Y_k) / max(Var(Y_l), Var(Y_k))."""
    batches = np.atleast_2d(np.asarray(batched, dtype=float))
    num_batches = batches.shape[1]
    if num_batches < MIN_BATCHES:
        raise UsageError(f"Cross-level covariance needs at least {MIN_BATCHES} batches, got {num_batches}")
    # variance of Y_l is the variance of a batch mean divided by the number of batches
    covariance = np.atleast_2d(np.cov(batches, ddof=1)) / num_batches
    variances = np.diag(covariance)
    scale = np.maximum.outer(variances, variances)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratios = np.where(scale > 0, covariance / scale, 0.0)
    result = CrossLevelCovariance(covariance, ratios, num_batches)
    if not result.bound_applies:
        logger.warning(
            f"Cross-level covariance ratio {result.max_ratio:.3f} >= 1; "
            "the combined variance bound does not apply"
        )
    return result
