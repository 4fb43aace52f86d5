"""Tests for the level hierarchy and whitened coordinates."""

import numpy as np
import pytest

from data_class.LevelHierarchy import LevelHierarchy
from data_class.WhitenedVector import WhitenedVector
from sampler_errors import DimensionError, UsageError


def test_from_rule_sizes():
    hierarchy = LevelHierarchy.from_rule(4, 1.0 / 20.0, 50, 100)
    assert hierarchy.param_dim == (150, 250, 450, 850)
    assert hierarchy.fem_dof == (441, 1681, 6561, 25921)
    assert [hierarchy.cells_per_side(level) for level in range(4)] == [20, 40, 80, 160]
    assert hierarchy.fine_dim(0) == 150
    assert hierarchy.fine_dim(2) == 200


def test_rejects_inconsistent_sizes():
    with pytest.raises(DimensionError):
        LevelHierarchy((0.5, 0.25), (9, 25), (6,))
    with pytest.raises(DimensionError):
        LevelHierarchy((0.5, 0.25), (9, 25), (8, 6))
    with pytest.raises(DimensionError):
        LevelHierarchy.from_rule(0)


def test_split_embed_inverse(small_hierarchy, rng):
    v = small_hierarchy.whiten(2, rng.standard_normal(12))
    parts = small_hierarchy.split(v)
    assert parts.coarse.shape == (8,)
    assert parts.fine.shape == (4,)
    assert small_hierarchy.embed(parts.coarse, parts.fine).same_as(v)


def test_restrict_keeps_leading_coefficients(small_hierarchy, rng):
    coeffs = rng.standard_normal(12)
    v = small_hierarchy.whiten(2, coeffs)
    coarse = small_hierarchy.restrict(v)
    assert coarse.level == 1
    np.testing.assert_array_equal(coarse.coeffs, coeffs[:8])
    assert small_hierarchy.restrict_to(v, 0).same_as(WhitenedVector(0, coeffs[:6]))


def test_level_zero_has_no_coarse_block(small_hierarchy):
    v = small_hierarchy.whiten(0, np.zeros(6))
    with pytest.raises(UsageError):
        small_hierarchy.split(v)
    with pytest.raises(UsageError):
        small_hierarchy.restrict(v)


def test_length_mismatch_is_rejected(small_hierarchy):
    with pytest.raises(DimensionError):
        small_hierarchy.whiten(1, np.zeros(7))
    with pytest.raises(DimensionError):
        small_hierarchy.embed(np.zeros(6), np.zeros(3), level=1)


def test_whitened_vector_is_read_only():
    source = np.arange(3.0)
    v = WhitenedVector(0, source)
    source[0] = 10.0
    assert v.coeffs[0] == 0.0
    with pytest.raises(ValueError):
        v.coeffs[0] = 1.0
    with pytest.raises(DimensionError):
        WhitenedVector(0, np.zeros((2, 2)))


def test_truncated_hierarchy(small_hierarchy):
    two = small_hierarchy.truncated(2)
    assert two.param_dim == (6, 8)
    assert two.finest_level == 1
    with pytest.raises(DimensionError):
        small_hierarchy.truncated(4)
