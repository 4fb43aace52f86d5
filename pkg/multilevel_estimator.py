"""Telescoping estimator, rate fits and optimal sample allocation."""

import logging
import math
from typing import Sequence, Tuple

import numpy as np

from data_class.LevelStats import LevelStats
from data_class.RateEstimate import RateEstimate
from data_class.SampleAllocation import SampleAllocation
from sampler_errors import ConfigError, DimensionError, UsageError

logger = logging.getLogger(__name__)

RATE_TIE_TOLERANCE = 1e-2


def telescope(level_stats: Sequence[LevelStats]) -> float:
    """Y_0 + sum_{l>=1} Y_l; every level 0..L must be present once."""
    levels = sorted(stats.level for stats in level_stats)
    if levels != list(range(len(levels))) or not levels:
        raise UsageError(f"Telescoping needs levels 0..L exactly once, got {levels}")
    return float(sum(stats.mean for stats in sorted(level_stats, key=lambda s: s.level)))


def variance_factor(cross_level_ratio: float) -> float:
    """(1 + r) / (1 - r)."""
    return (1.0 + cross_level_ratio) / (1.0 - cross_level_ratio)


def allocate_samples(
    tau: Sequence[float],
    variance: Sequence[float],
    cost: Sequence[float],
    epsilon: float,
    cross_level_ratio: float = 0.1,
    min_samples: int = 100,
) -> SampleAllocation:
    """N_l = ceil(mu sqrt(tau_l Var_l / C_l)) with the variance budget eps^2 / 2.

    mu = 2 (1 + r)/(1 - r) sum_l sqrt(tau_l Var_l C_l) / eps^2 makes
    (1 + r)/(1 - r) sum_l tau_l Var_l / N_l = eps^2 / 2 before rounding, and
    minimises sum_l N_l C_l under that constraint. Each N_l is at least
    ``min_samples``.
    """
    problems = []
    if not epsilon > 0:
        problems.append(f"epsilon must be positive, got {epsilon}")
    if not 0.0 <= cross_level_ratio < 1.0:
        problems.append(f"cross_level_ratio must lie in [0, 1), got {cross_level_ratio}")
    if problems:
        raise ConfigError(problems)
    tau = np.asarray(tau, dtype=float)
    variance = np.asarray(variance, dtype=float)
    cost = np.asarray(cost, dtype=float)
    if not (tau.shape == variance.shape == cost.shape) or tau.ndim != 1:
        raise DimensionError("tau, variance and cost need one entry per level")
    if np.any(tau < 1) or np.any(variance < 0) or np.any(cost <= 0):
        raise ConfigError("Allocation needs tau >= 1, variance >= 0 and cost > 0")

    factor = variance_factor(cross_level_ratio)
    weighted = tau * variance
    mu = 2.0 * factor * np.sum(np.sqrt(weighted * cost)) / epsilon**2
    continuous = mu * np.sqrt(weighted / cost)
    num_samples = [int(max(min_samples, math.ceil(n))) for n in continuous]
    bound = factor * float(np.sum(weighted / np.asarray(num_samples, dtype=float)))
    allocation = SampleAllocation(
        num_samples=num_samples,
        continuous=[float(n) for n in continuous],
        epsilon=float(epsilon),
        cross_level_ratio=float(cross_level_ratio),
        predicted_cost=float(np.dot(num_samples, cost)),
        variance_bound=bound,
    )
    logger.info(f"Allocation for eps={epsilon:g}: N = {num_samples}")
    return allocation


def _log_log_fit(m: np.ndarray, values: np.ndarray) -> Tuple[float, float]:
    """Slope of log(values) against log(m) and its standard error."""
    x = np.log(m)
    y = np.log(values)
    design = np.column_stack([np.ones_like(x), x])
    coeffs, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    dof = x.shape[0] - 2
    if dof <= 0:
        return float(coeffs[1]), float("nan")
    residual = y - design @ coeffs
    sigma2 = residual @ residual / dof
    stderr = math.sqrt(sigma2 / np.sum((x - x.mean()) ** 2))
    return float(coeffs[1]), stderr


def predicted_cost_exponent(theta_b: float, theta_v: float, theta_c: float) -> Tuple[str, float, bool]:
    """Regime, exponent of 1/eps and whether a |log eps|^2 factor applies."""
    if abs(theta_v - theta_c) <= RATE_TIE_TOLERANCE:
        return "theta_v = theta_c", 2.0, True
    if theta_v > theta_c:
        return "theta_v > theta_c", 2.0, False
    return "theta_v < theta_c", 2.0 + (theta_c - theta_v) / theta_b, False


def estimate_rates(
    fem_dof: Sequence[int],
    bias_proxies: Sequence[float],
    variances: Sequence[float],
    costs: Sequence[float],
) -> RateEstimate:
    """Log-log least-squares fits in M_l of |Y_l| (theta_b), Var(D_l) (theta_v) and C_l (theta_c).

    Bias and variance fits use levels >= 1; the cost fit uses every level.
    """
    m = np.asarray(fem_dof, dtype=float)
    if m.shape[0] < 3:
        logger.info("Fewer than three levels: convergence rates unavailable")
        return RateEstimate(available=False)
    bias = np.abs(np.asarray(bias_proxies, dtype=float))
    variances = np.asarray(variances, dtype=float)
    costs = np.asarray(costs, dtype=float)
    if np.any(bias[1:] <= 0) or np.any(variances[1:] <= 0) or np.any(costs <= 0):
        logger.warning("Non-positive level statistics: convergence rates unavailable")
        return RateEstimate(available=False)

    bias_slope, bias_se = _log_log_fit(m[1:], bias[1:])
    variance_slope, variance_se = _log_log_fit(m[1:], variances[1:])
    cost_slope, cost_se = _log_log_fit(m, costs)
    theta_b, theta_v, theta_c = -bias_slope, -variance_slope, cost_slope
    if theta_b > 0:
        regime, exponent, log_factor = predicted_cost_exponent(theta_b, theta_v, theta_c)
    else:
        regime, exponent, log_factor = "bias not decaying", None, False
    return RateEstimate(
        available=True,
        theta_b=theta_b,
        theta_v=theta_v,
        theta_c=theta_c,
        theta_b_stderr=bias_se,
        theta_v_stderr=variance_se,
        theta_c_stderr=cost_se,
        regime=regime,
        cost_exponent=exponent,
        log_factor=log_factor,
    )


def extrapolate_bias(finest_correction: float, fem_dof: Sequence[int], theta_b: float) -> float:
    """|Y_L| q / (1 - q) with q = (M_{L-1} / M_L)^theta_b, the geometric tail beyond level L."""
    if len(fem_dof) < 2 or theta_b <= 0:
        raise UsageError("Bias extrapolation needs two levels and a positive theta_b")
    q = (fem_dof[-2] / fem_dof[-1]) ** theta_b
    return abs(finest_correction) * q / (1.0 - q)


def combined_variance(level_stats: Sequence[LevelStats]) -> float:
    """sum_l tau_l Var_l / N_l."""
    return float(sum(stats.estimator_variance for stats in level_stats))

