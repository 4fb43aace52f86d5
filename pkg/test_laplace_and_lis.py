"""Tests for the Laplace approximation, the eigensolver and the hierarchical LIS."""

from collections import Counter
from dataclasses import replace

import numpy as np
import pytest

from AveragedGnhOperator import AveragedGnhOperator
from LaplaceApproximation import LaplaceApproximation, laplace_sample
from conftest import attach_linear_data
from data_class.LaplaceReference import LaplaceReference
from data_class.LevelHierarchy import LevelHierarchy
from data_class.LisBuildResult import LisBuildResult
from data_class.WhitenedVector import WhitenedVector
from lanczos_eigensolver import fix_column_signs, lanczos_eigsh
from lis_construction import build_base_lis, enrich, lift_basis, single_level_lis
from lis_cost_model import cost_model, reduction_bound, storage_reduction_factors
from lis_file import read_lis_file, write_lis_file
from model_setup.linear_gaussian import build_linear_gaussian_models
from sampler_errors import DimensionError, UsageError


def low_rank_psd(dim, eigenvalues, seed):
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((dim, len(eigenvalues))))
    return (q * np.asarray(eigenvalues)) @ q.T


class TestLaplaceApproximation:
    def test_map_matches_closed_form_posterior(self, linear_models):
        model = linear_models[1]
        result = LaplaceApproximation(model, gradient_tol=1e-10).find_map()
        mean, _ = model.posterior()
        assert result.converged
        np.testing.assert_allclose(result.point.coeffs, mean, atol=1e-8)
        assert np.all(np.diff(result.objective_history) <= 1e-12)

    def test_reference_covariance_is_the_posterior_covariance(self, linear_models):
        model = linear_models[2]
        approximation = LaplaceApproximation(model, gradient_tol=1e-10, eigenvalue_threshold=1e-10)
        reference = approximation.build_reference()
        assert reference.rank == model.num_observations
        np.testing.assert_allclose(reference.covariance(), model.posterior()[1], atol=1e-8)

    def test_uninformative_data_gives_the_prior_mode(self, small_hierarchy):
        models = build_linear_gaussian_models(small_hierarchy, num_observations=3, seed=5)
        models = attach_linear_data(models, snr=1e-12)
        result = LaplaceApproximation(models[0]).find_map()
        np.testing.assert_allclose(result.point.coeffs, 0.0, atol=1e-6)

    def test_sample_variance_along_an_informed_direction(self):
        psi = np.zeros((3, 1))
        psi[1, 0] = 1.0
        reference = LaplaceReference(0, WhitenedVector(0, np.zeros(3)), np.array([3.0]), psi)
        samples = np.array([s.coeffs for s in laplace_sample(reference, 20000, seed=4)])
        variances = samples.var(axis=0)
        assert variances[1] == pytest.approx(0.25, abs=0.02)
        assert variances[0] == pytest.approx(1.0, abs=0.05)

    def test_samples_do_not_depend_on_worker_count(self, linear_models):
        reference = LaplaceApproximation(linear_models[0]).build_reference()
        serial = laplace_sample(reference, 8, seed=9)
        threaded = laplace_sample(reference, 8, seed=9, max_workers=3)
        assert all(a.same_as(b) for a, b in zip(serial, threaded))

    def test_reused_seed_sequence_gives_the_same_samples(self, linear_models):
        reference = LaplaceApproximation(linear_models[0]).build_reference()
        seeds = np.random.SeedSequence(9)
        first = laplace_sample(reference, 6, seeds)
        second = laplace_sample(reference, 6, seeds)
        assert all(a.same_as(b) for a, b in zip(first, second))
        assert all(a.same_as(b) for a, b in zip(first, laplace_sample(reference, 6, 9)))
        assert seeds.n_children_spawned == 0

    def test_averaged_operator_matches_dense_average(self, linear_models, rng):
        model = linear_models[0]
        samples = [WhitenedVector(0, rng.standard_normal(model.param_dim)) for _ in range(3)]
        operator = AveragedGnhOperator(model, samples, max_workers=2)
        expected = model.operator.T @ model.operator / model.observations.sigma**2
        np.testing.assert_allclose(operator.dense(), expected, atol=1e-10)
        np.testing.assert_array_equal(operator.apply(np.zeros(model.param_dim)), 0.0)

    def test_averaged_operator_needs_samples(self, linear_models):
        with pytest.raises(DimensionError):
            AveragedGnhOperator(linear_models[0], [])


class TestLanczos:
    def test_matches_dense_eigensolve(self):
        spectrum = 10.0 * 0.5 ** np.arange(30)
        matrix = low_rank_psd(30, spectrum, seed=2)
        result = lanczos_eigsh(lambda x: matrix @ x, 30, threshold=1e-2, seed=1)
        values, vectors = np.linalg.eigh(matrix)
        values, vectors = values[::-1][:10], fix_column_signs(vectors[:, ::-1][:, :10])
        assert result.rank == 10
        np.testing.assert_allclose(result.eigenvalues, values, rtol=1e-8)
        np.testing.assert_allclose(result.eigenvectors, vectors, atol=1e-6)

    def test_diagonal_operator(self):
        matrix = np.diag([4.0, 2.0, 0.5, 0.001])
        result = lanczos_eigsh(lambda x: matrix @ x, 4, threshold=1e-2)
        np.testing.assert_allclose(result.eigenvalues, [4.0, 2.0, 0.5], rtol=1e-10)
        np.testing.assert_allclose(result.eigenvectors, np.eye(4)[:, :3], atol=1e-8)

    def test_rank_cap_is_flagged(self):
        matrix = np.diag([4.0, 2.0, 0.5, 0.001])
        result = lanczos_eigsh(lambda x: matrix @ x, 4, threshold=1e-2, max_rank=2)
        assert result.rank == 2
        assert result.truncated_by_rank


class TestHierarchicalLis:
    @pytest.fixture
    def two_levels(self, small_hierarchy):
        hierarchy = small_hierarchy.truncated(2)
        coarse = low_rank_psd(6, [5.0, 1.0, 0.2], seed=11)
        fine = low_rank_psd(8, [6.0, 2.5, 0.7, 0.05], seed=12)
        return hierarchy, coarse, fine

    def test_base_block_matches_dense_eigensolve(self, two_levels):
        hierarchy, coarse, _ = two_levels
        basis = build_base_lis(lambda x: coarse @ x, hierarchy, threshold=1e-2)
        assert basis.rank == 3
        np.testing.assert_allclose(basis.eigenvalues, [5.0, 1.0, 0.2], rtol=1e-8)
        dense = basis.dense()
        np.testing.assert_allclose(dense.T @ dense, np.eye(3), atol=1e-10)

    def test_threshold_above_spectrum_gives_an_empty_basis(self, two_levels):
        hierarchy, coarse, _ = two_levels
        basis = build_base_lis(lambda x: coarse @ x, hierarchy, threshold=10.0)
        assert basis.rank == 0
        assert basis.apply(np.zeros(0)).shape == (6,)

    def test_lifting_pads_with_zeros(self, two_levels, rng):
        hierarchy, coarse, fine = two_levels
        basis = build_base_lis(lambda x: coarse @ x, hierarchy, threshold=1e-2)
        lifted = lift_basis(basis)
        w = rng.standard_normal(3)
        np.testing.assert_allclose(lifted.apply(w)[:6], basis.apply(w))
        np.testing.assert_array_equal(lifted.apply(w)[6:], 0.0)
        np.testing.assert_allclose(np.linalg.norm(lifted.apply(w)), np.linalg.norm(basis.apply(w)))
        with pytest.raises(UsageError):
            lift_basis(enrich(lifted, lambda x: fine @ x))

    def test_enrichment_matches_dense_deflated_eigensolve(self, two_levels):
        hierarchy, coarse, fine = two_levels
        lifted = lift_basis(build_base_lis(lambda x: coarse @ x, hierarchy, threshold=1e-2))
        basis = enrich(lifted, lambda x: fine @ x, threshold=1e-2)

        psi = lifted.dense()
        deflate = np.eye(8) - psi @ psi.T
        values, vectors = np.linalg.eigh(deflate @ fine @ deflate)
        keep = values > 1e-2
        expected_values = values[keep][::-1]

        np.testing.assert_allclose(basis.blocks[-1].eigenvalues, expected_values, rtol=1e-8)
        new = np.vstack([basis.blocks[-1].z_coarse, basis.blocks[-1].z_fine])
        np.testing.assert_allclose(new @ new.T, vectors[:, keep] @ vectors[:, keep].T, atol=1e-8)
        dense = basis.dense()
        np.testing.assert_allclose(dense.T @ dense, np.eye(basis.rank), atol=1e-10)

    def test_operator_inside_lifted_span_adds_nothing(self, two_levels):
        hierarchy, coarse, _ = two_levels
        lifted = lift_basis(build_base_lis(lambda x: coarse @ x, hierarchy, threshold=1e-2))
        psi = lifted.dense()
        contained = psi @ np.diag([3.0, 2.0, 1.0]) @ psi.T
        basis = enrich(lifted, lambda x: contained @ x, threshold=1e-2)
        assert basis.added == (3, 0)

    def test_apply_matches_dense_and_counts_flops(self, random_basis, rng):
        basis = random_basis((3, 1, 2))
        dense = basis.dense()
        w = rng.standard_normal(basis.rank)
        counter = Counter()
        np.testing.assert_allclose(basis.apply(w, counter), dense @ w, atol=1e-12)
        assert basis.apply_cost() <= counter["flops"] <= 2 * basis.apply_cost()
        x = rng.standard_normal(basis.param_dim)
        np.testing.assert_allclose(basis.apply_transpose(x), dense.T @ x, atol=1e-12)
        columns = rng.standard_normal((basis.rank, 4))
        np.testing.assert_allclose(basis.apply(columns), dense @ columns, atol=1e-12)

    def test_single_level_lis_keeps_every_informed_direction(self, two_levels):
        _, _, fine = two_levels
        single = single_level_lis(lambda x: fine @ x, 8, threshold=1e-2)
        assert single.rank == 4


class TestCostModel:
    def test_single_level_ratio_is_one(self):
        hierarchy = LevelHierarchy.from_rule(1, 1.0 / 20.0, 50, 100)
        summary = cost_model(hierarchy, [80], 80)
        assert summary.storage_ratio == pytest.approx(1.0)
        assert summary.build_ratio == pytest.approx(1.0)

    def test_reference_storage_reduction_factors(self):
        hierarchy = LevelHierarchy.from_rule(4, 1.0 / 20.0, 50, 100)
        factors = storage_reduction_factors(hierarchy, [80, 21, 19, 12], [80, 91, 97, 100])
        # sum_l R_l s_l / (R_L r_L) with R = 150, 250, 450, 850
        expected = [1.0, 17_250 / 22_750, 25_800 / 43_650, 36_000 / 85_000]
        np.testing.assert_allclose(factors, expected, rtol=1e-12)
        # two-digit reference figures; the exact ratios above differ from them by up to 0.018
        np.testing.assert_allclose(factors, [1.0, 0.74, 0.60, 0.43], atol=0.02)

    def test_geometric_sequences_respect_the_bound(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            beta_p, beta_r = rng.uniform(0.1, 1.5, 2)
            finest = int(rng.integers(1, 6))
            levels = np.arange(finest + 1)
            param_dim = 40.0 * np.exp(beta_p * levels)
            added = 30.0 * np.exp(-beta_r * levels)
            multi = float(param_dim @ added)
            single = float(param_dim[-1] * added[0])
            bound = reduction_bound(beta_p, beta_r, finest, 1.0)
            assert multi / single <= bound * (1 + 1e-12)

    def test_mismatched_ranks(self):
        hierarchy = LevelHierarchy.from_rule(2, 0.25, 4, 2)
        with pytest.raises(DimensionError):
            cost_model(hierarchy, [3], 3)


def test_lis_file_round_trip(tmp_path, random_basis, linear_models):
    basis = random_basis((3, 1, 2))
    references = [LaplaceApproximation(model).build_reference() for model in linear_models]
    result = LisBuildResult(basis, references, 1e-2, [5, 5, 5])
    loaded = read_lis_file(write_lis_file(result, tmp_path / "lis.bin"))
    assert loaded.added == (3, 1, 2)
    assert loaded.basis.hierarchy == basis.hierarchy
    np.testing.assert_array_equal(loaded.basis.dense(), basis.dense())
    for original, copy in zip(references, loaded.references):
        assert copy.map_point.same_as(original.map_point)
        np.testing.assert_array_equal(copy.eigenvectors, original.eigenvectors)
        assert copy.map_converged == original.map_converged
        assert copy.gradient_norm == pytest.approx(original.gradient_norm)


def test_lis_file_keeps_an_unconverged_map(tmp_path, random_basis, linear_models):
    references = [LaplaceApproximation(model).build_reference() for model in linear_models]
    references[1] = replace(references[1], map_converged=False, gradient_norm=0.37)
    result = LisBuildResult(random_basis((3, 1, 2)), references, 1e-2, [5, 5, 5])
    loaded = read_lis_file(write_lis_file(result, tmp_path / "lis.bin"))
    assert [reference.map_converged for reference in loaded.references] == [
        reference.map_converged for reference in references
    ]
    assert not loaded.references[1].map_converged
    assert loaded.references[1].gradient_norm == pytest.approx(0.37)
