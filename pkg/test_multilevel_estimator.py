"""Tests for the telescoping estimator, sample allocation and rate fits."""

import numpy as np
import pytest

from data_class.LevelStats import LevelStats
from data_class.MultilevelReport import MultilevelReport
from data_class.RunStatus import RunStatus
from data_class.SamplerIssue import SamplerIssue
from multilevel_estimator import (
    allocate_samples,
    combined_variance,
    estimate_rates,
    extrapolate_bias,
    predicted_cost_exponent,
    telescope,
    variance_factor,
)
from sampler_errors import ConfigError, DimensionError, UsageError


def stats(level, mean, variance=1.0, iact=1.0, num_samples=100, cost=1.0):
    return LevelStats(level, mean, variance, iact, num_samples, cost)


class TestTelescope:
    def test_sum_over_levels(self):
        assert telescope([stats(1, 0.2), stats(0, 1.0), stats(2, -0.05)]) == pytest.approx(1.15)

    @pytest.mark.parametrize("levels", [[0, 2], [1, 2], [0, 0, 1], []])
    def test_levels_must_be_complete(self, levels):
        with pytest.raises(UsageError):
            telescope([stats(level, 1.0) for level in levels])

    def test_combined_variance(self):
        levels = [stats(0, 1.0, variance=2.0, iact=3.0, num_samples=60), stats(1, 0.1, variance=0.5, num_samples=50)]
        assert combined_variance(levels) == pytest.approx(0.1 + 0.01)

    def test_invalid_level_statistics(self):
        with pytest.raises(DimensionError):
            stats(0, 1.0, iact=0.5)
        with pytest.raises(DimensionError):
            stats(0, 1.0, variance=-1.0)


class TestAllocation:
    def test_single_level_closed_form(self):
        allocation = allocate_samples([2.0], [3.0], [4.0], epsilon=0.1, cross_level_ratio=0.0)
        # N = 2 tau Var / eps^2
        assert allocation.continuous[0] == pytest.approx(1200.0)
        assert allocation.num_samples[0] in (1200, 1201)
        assert allocation.variance_bound <= 0.1**2 / 2

    def test_symmetric_levels_get_equal_samples(self):
        allocation = allocate_samples([1.5] * 3, [0.2] * 3, [2.0] * 3, epsilon=0.01)
        assert len(set(allocation.num_samples)) == 1
        assert allocation.variance_bound <= 0.01**2 / 2 * (1 + 1e-12)
        assert allocation.predicted_cost == pytest.approx(3 * 2.0 * allocation.num_samples[0])

    def test_allocation_minimises_cost_for_the_budget(self):
        tau, variance, cost = np.array([3.0, 2.0, 1.5]), np.array([1.0, 0.1, 0.01]), np.array([1.0, 4.0, 16.0])
        allocation = allocate_samples(tau, variance, cost, epsilon=0.02, cross_level_ratio=0.2, min_samples=1)
        continuous = np.array(allocation.continuous)
        factor = variance_factor(0.2)
        assert factor * np.sum(tau * variance / continuous) == pytest.approx(0.02**2 / 2)
        # N_l proportional to sqrt(tau Var / C)
        ratios = continuous / np.sqrt(tau * variance / cost)
        np.testing.assert_allclose(ratios, ratios[0])

    def test_minimum_sample_floor(self):
        allocation = allocate_samples([1.0, 1.0], [1e-8, 1e-8], [1.0, 10.0], epsilon=1.0, min_samples=100)
        assert allocation.num_samples == [100, 100]

    def test_invalid_arguments(self):
        with pytest.raises(ConfigError):
            allocate_samples([1.0], [1.0], [1.0], epsilon=0.0)
        with pytest.raises(ConfigError):
            allocate_samples([1.0], [1.0], [1.0], epsilon=0.1, cross_level_ratio=1.0)
        with pytest.raises(ConfigError):
            allocate_samples([0.5], [1.0], [1.0], epsilon=0.1)
        with pytest.raises(DimensionError):
            allocate_samples([1.0, 1.0], [1.0], [1.0], epsilon=0.1)

    def test_variance_factor(self):
        assert variance_factor(0.0) == 1.0
        assert variance_factor(0.5) == pytest.approx(3.0)


class TestRates:
    def test_exact_power_laws_are_recovered(self):
        fem_dof = np.array([100, 400, 1600, 6400])
        rates = estimate_rates(fem_dof, 2.0 * fem_dof**-0.5, 0.3 * fem_dof**-0.5, 1e-4 * fem_dof**1.2)
        assert rates.available
        assert rates.theta_b == pytest.approx(0.5, abs=1e-10)
        assert rates.theta_v == pytest.approx(0.5, abs=1e-10)
        assert rates.theta_c == pytest.approx(1.2, abs=1e-10)
        assert rates.regime == "theta_v < theta_c"
        assert rates.cost_exponent == pytest.approx(3.4)

    def test_two_levels_are_not_enough(self):
        assert not estimate_rates([100, 400], [1.0, 0.5], [1.0, 0.5], [1.0, 4.0]).available

    def test_non_positive_statistics(self):
        assert not estimate_rates([100, 400, 1600], [1.0, 0.0, 0.1], [1.0, 0.5, 0.2], [1.0, 4.0, 16.0]).available

    def test_cost_regimes(self):
        assert predicted_cost_exponent(0.5, 1.5, 1.0) == ("theta_v > theta_c", 2.0, False)
        assert predicted_cost_exponent(0.5, 1.0, 1.0) == ("theta_v = theta_c", 2.0, True)
        regime, exponent, log_factor = predicted_cost_exponent(0.5, 0.5, 1.2)
        assert exponent == pytest.approx(3.4)
        assert not log_factor

    def test_bias_extrapolation(self):
        # q = (100/400)^0.5 = 1/2, tail = |Y_L| q / (1 - q)
        assert extrapolate_bias(-0.1, [25, 100, 400], 0.5) == pytest.approx(0.1)
        with pytest.raises(UsageError):
            extrapolate_bias(0.1, [100], 0.5)
        with pytest.raises(UsageError):
            extrapolate_bias(0.1, [100, 400], 0.0)


class TestReportStatus:
    def test_status_is_the_worst_issue(self):
        issues = [SamplerIssue("iact_unavailable", "short chain", RunStatus.WARNING, 1)]
        report = MultilevelReport("MLpCN", [stats(0, 1.0), stats(1, 0.5)], 0.0, 0.01, 0.01, 0.0, issues=issues)
        assert report.estimate == pytest.approx(1.5)
        assert report.status == RunStatus.WARNING
        report.add_issue(SamplerIssue("level_failure", "solver", RunStatus.FAIL, 2))
        assert report.status == RunStatus.FAIL
        report.add_issue(SamplerIssue("bias_budget", "bias", RunStatus.WARNING))
        assert report.status == RunStatus.FAIL

    def test_worst_of_nothing_passes(self):
        assert RunStatus.worst([]) == RunStatus.PASS
