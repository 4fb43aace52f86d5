"""Tests for pCN/DILI proposals, the coupled fine-block proposal and acceptance ratios."""

import numpy as np
import pytest
from scipy.stats import multivariate_normal

from ProposalKernel import CoupledDiliKernel, DiliKernel, PcnKernel, floor_covariance
from conftest import random_spd
from data_class.HierarchicalLisBasis import HierarchicalLisBasis
from data_class.LisLevelBlock import LisLevelBlock
from dili_proposal import (
    accept_base,
    accept_coupled,
    build_dili_operators,
    coarse_marginal_log_correction,
    coupled_propose,
    dili_propose,
    pcn_propose,
    precompute_conditional,
)
from sampler_errors import ConfigError, NumericalError, UsageError


def symmetric_sqrt(matrix):
    values, vectors = np.linalg.eigh(matrix)
    return (vectors * np.sqrt(values)) @ vectors.T


def empty_basis(hierarchy):
    block = LisLevelBlock(0, np.zeros((0, 0)), np.zeros((hierarchy.param_dim[0], 0)), np.zeros(0))
    return HierarchicalLisBasis(hierarchy.truncated(1), (block,), 0)


def block_diagonal_basis(hierarchy, seed=0):
    """Level-1 basis whose fine block has no coarse rows."""
    rng = np.random.default_rng(seed)
    hierarchy = hierarchy.truncated(2)
    z0, _ = np.linalg.qr(rng.standard_normal((6, 3)))
    fine = np.zeros((2, 1))
    fine[0, 0] = 1.0
    blocks = (
        LisLevelBlock(0, np.zeros((0, 3)), z0, np.array([2.0, 1.0, 0.5])),
        LisLevelBlock(1, np.zeros((6, 1)), fine, np.array([0.3])),
    )
    return HierarchicalLisBasis(hierarchy, blocks, 1)


class TestPcnAndDili:
    def test_pcn_with_zero_coefficient_is_a_fresh_draw(self, rng):
        v = rng.standard_normal(5)
        proposal = pcn_propose(v, 0.0, np.random.default_rng(3))
        np.testing.assert_array_equal(proposal, np.random.default_rng(3).standard_normal(5))

    def test_pcn_coefficient_range(self, rng):
        with pytest.raises(ConfigError):
            pcn_propose(np.zeros(2), 1.0, rng)

    def test_operators_square_to_identity_and_commute(self, dili_operators):
        ops = dili_operators()
        a, b = ops.dense_a(), ops.dense_b()
        np.testing.assert_allclose(a @ a + b @ b, np.eye(ops.param_dim), atol=1e-10)
        np.testing.assert_allclose(a @ b, b @ a, atol=1e-10)
        np.testing.assert_allclose(a, a.T, atol=1e-12)

    def test_unit_covariance_with_step_two_is_an_independence_proposal(self, random_basis):
        basis = random_basis((3,), num_levels=1)
        ops = build_dili_operators(np.eye(3), basis, time_step=2.0)
        np.testing.assert_allclose(ops.a_r, 0.0, atol=1e-15)
        np.testing.assert_allclose(ops.b_r, np.eye(3), atol=1e-15)

    def test_invalid_steps_and_covariances(self, random_basis):
        basis = random_basis((3,), num_levels=1)
        with pytest.raises(ConfigError):
            build_dili_operators(np.eye(3), basis, time_step=0.0)
        with pytest.raises(NumericalError):
            build_dili_operators(-np.eye(3), basis)

    def test_empty_subspace_reduces_to_pcn(self, small_hierarchy, rng):
        ops = build_dili_operators(np.zeros((0, 0)), empty_basis(small_hierarchy), 1.0, 0.1)
        v = rng.standard_normal(6)
        proposal = dili_propose(v, ops, np.random.default_rng(5))
        expected = ops.a_perp * v + ops.b_perp * np.random.default_rng(5).standard_normal(6)
        np.testing.assert_allclose(proposal, expected)

    def test_dili_draws_keep_the_prior(self, dili_operators):
        ops = dili_operators()
        a, b = ops.dense_a(), ops.dense_b()
        rng = np.random.default_rng(17)
        draws = rng.standard_normal((100_000, ops.param_dim))
        moved = draws @ a.T + rng.standard_normal(draws.shape) @ b.T
        np.testing.assert_allclose(moved.mean(axis=0), 0.0, atol=0.02)
        np.testing.assert_allclose(np.cov(moved, rowvar=False), np.eye(ops.param_dim), atol=0.03)

    @pytest.mark.slow
    def test_dili_propose_keeps_the_prior(self, dili_operators):
        ops = dili_operators()
        rng = np.random.default_rng(23)
        moved = np.array([dili_propose(rng.standard_normal(ops.param_dim), ops, rng) for _ in range(20_000)])
        np.testing.assert_allclose(moved.mean(axis=0), 0.0, atol=0.04)
        np.testing.assert_allclose(moved.var(axis=0), 1.0, atol=0.06)


class TestAcceptance:
    def test_base_acceptance(self):
        assert accept_base(0.7, 0.7) == 1.0
        assert accept_base(1.0, 0.0) == 1.0
        assert accept_base(0.0, 2.0) == pytest.approx(np.exp(-2.0))
        assert accept_base(np.nan, 0.0) == 0.0

    def test_coupled_acceptance(self):
        assert accept_coupled(1.0, 1.0, 1.0, 1.0) == 1.0
        assert accept_coupled(2.0, 0.5, 3.0, 1.5) == 1.0
        assert accept_coupled(0.0, 0.0, 1.0, 0.0, log_correction=0.5) == pytest.approx(np.exp(-0.5))


class TestConditionalFactors:
    @pytest.mark.parametrize("level", [1, 2])
    def test_factors_match_dense_block_inversion(self, dili_operators, level, rng):
        ops = dili_operators(level=level)
        factors = precompute_conditional(ops)
        r_coarse = ops.basis.hierarchy.param_dim[level - 1]
        b = ops.dense_b()
        precision = np.linalg.inv(b @ b)
        p_ff, p_fc = precision[r_coarse:, r_coarse:], precision[r_coarse:, :r_coarse]
        fine_dim = ops.param_dim - r_coarse

        r_c = rng.standard_normal(r_coarse)
        np.testing.assert_allclose(
            factors.conditional_mean(r_c), -np.linalg.solve(p_ff, p_fc @ r_c), atol=1e-8
        )
        inverse_sqrt = symmetric_sqrt(np.linalg.inv(p_ff))
        applied = np.column_stack([factors.inverse_sqrt_apply(e) for e in np.eye(fine_dim)])
        np.testing.assert_allclose(applied, inverse_sqrt, atol=1e-8)
        x = rng.standard_normal(fine_dim)
        np.testing.assert_allclose(factors.precision_ff_apply(x), p_ff @ x, atol=1e-8)

    def test_zero_noise_proposal_is_the_conditional_mean(self, dili_operators, rng):
        ops = dili_operators()
        factors = precompute_conditional(ops)
        r_coarse = ops.basis.hierarchy.param_dim[1]
        a, b = ops.dense_a(), ops.dense_b()
        covariance = b @ b
        v = rng.standard_normal(ops.param_dim)
        coarse = rng.standard_normal(r_coarse)
        proposal = coupled_propose(v, coarse, ops, factors, xi=np.zeros(ops.param_dim - r_coarse))

        mean = a @ v
        expected = mean[r_coarse:] + covariance[r_coarse:, :r_coarse] @ np.linalg.solve(
            covariance[:r_coarse, :r_coarse], coarse - mean[:r_coarse]
        )
        np.testing.assert_array_equal(proposal[:r_coarse], coarse)
        np.testing.assert_allclose(proposal[r_coarse:], expected, atol=1e-8)

    def test_matched_complement_gives_trivial_factors(self, small_hierarchy, rng):
        basis = block_diagonal_basis(small_hierarchy)
        time_step, complement_time_step = 1.0, 0.1
        sigma = np.zeros((4, 4))
        sigma[:3, :3] = random_spd(3, seed=4)
        sigma[3, 3] = complement_time_step / time_step
        ops = build_dili_operators(sigma, basis, time_step, complement_time_step)
        factors = precompute_conditional(ops)
        np.testing.assert_allclose(factors.d, 0.0, atol=1e-12)
        x = rng.standard_normal(2)
        np.testing.assert_allclose(factors.inverse_sqrt_apply(x), ops.b_perp * x, atol=1e-12)
        np.testing.assert_allclose(factors.conditional_mean(rng.standard_normal(6)), 0.0, atol=1e-12)

    def test_level_zero_has_no_conditional(self, dili_operators):
        with pytest.raises(UsageError):
            precompute_conditional(dili_operators(level=0))


class TestCoupledAcceptance:
    def test_simplified_ratio_times_correction_is_the_full_ratio(self, dili_operators, rng):
        ops = dili_operators()
        factors = precompute_conditional(ops)
        r_coarse = ops.basis.hierarchy.param_dim[1]
        a, b = ops.dense_a(), ops.dense_b()
        covariance = b @ b

        def log_kernel(x, y):
            return multivariate_normal.logpdf(x, a @ y, covariance)

        def log_coarse_kernel(x, y):
            return multivariate_normal.logpdf(
                x[:r_coarse], (a @ y)[:r_coarse], covariance[:r_coarse, :r_coarse]
            )

        def log_proposal(x, y, eta_coarse):
            coarse_posterior = -eta_coarse - 0.5 * x[:r_coarse] @ x[:r_coarse]
            return coarse_posterior + log_kernel(x, y) - log_coarse_kernel(x, y)

        current, proposed = rng.standard_normal((2, ops.param_dim))
        eta_fine_current, eta_coarse_current, eta_fine_proposed, eta_coarse_proposed = rng.uniform(0, 3, 4)
        full = (
            (-eta_fine_proposed - 0.5 * proposed @ proposed)
            - (-eta_fine_current - 0.5 * current @ current)
            + log_proposal(current, proposed, eta_coarse_current)
            - log_proposal(proposed, current, eta_coarse_proposed)
        )
        simplified = (
            (eta_fine_current - eta_coarse_current)
            - (eta_fine_proposed - eta_coarse_proposed)
            + coarse_marginal_log_correction(current, proposed, ops, factors)
        )
        assert simplified == pytest.approx(full, abs=1e-8)

    def test_correction_vanishes_without_coarse_fine_coupling(self, small_hierarchy, rng):
        basis = block_diagonal_basis(small_hierarchy)
        sigma = np.zeros((4, 4))
        sigma[:3, :3] = random_spd(3, seed=6)
        sigma[3, 3] = 1.7
        ops = build_dili_operators(sigma, basis)
        factors = precompute_conditional(ops)
        current, proposed = rng.standard_normal((2, 8))
        assert coarse_marginal_log_correction(current, proposed, ops, factors) == pytest.approx(0.0, abs=1e-10)


class TestKernels:
    def test_adaptation_refreshes_until_frozen(self, dili_operators, rng):
        ops = dili_operators(level=0)
        kernel = DiliKernel(ops, adapt=True, adapt_interval=5)
        for _ in range(10):
            kernel.record(rng.standard_normal(ops.param_dim), accepted=True)
        assert kernel.num_updates == 2
        assert kernel.operators is not ops
        kernel.freeze()
        for _ in range(10):
            kernel.record(rng.standard_normal(ops.param_dim), accepted=True)
        assert kernel.num_updates == 2
        assert kernel.clone().operators is ops

    def test_coupled_kernel_refreshes_its_factors(self, dili_operators, rng):
        ops = dili_operators()
        kernel = CoupledDiliKernel(ops, adapt=True, adapt_interval=3)
        before = kernel.factors
        for _ in range(3):
            kernel.record(rng.standard_normal(ops.param_dim), accepted=True)
        assert kernel.factors is not before
        assert kernel.clone().factors is before

    def test_pcn_kernel_is_not_adaptive(self):
        kernel = PcnKernel(0.9)
        assert not kernel.adaptive
        assert kernel.clone().coefficient == 0.9

    def test_floor_covariance_lifts_small_eigenvalues(self):
        floored = floor_covariance(np.diag([1.0, 1e-12]), 1e-6)
        np.testing.assert_allclose(np.linalg.eigvalsh(floored), [1e-6, 1.0])
