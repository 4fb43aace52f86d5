"""Hierarchical likelihood-informed subspace: base block, lifting and enrichment."""

import logging
from typing import Callable

import numpy as np

from data_class.EigenpairResult import EigenpairResult
from data_class.HierarchicalLisBasis import HierarchicalLisBasis
from data_class.LevelHierarchy import LevelHierarchy
from data_class.LisLevelBlock import LisLevelBlock
from lanczos_eigensolver import lanczos_eigsh
from sampler_errors import ConfigError, UsageError

logger = logging.getLogger(__name__)

Operator = Callable[[np.ndarray], np.ndarray]


def rank_cap(available: int, num_observations: int | None) -> int:
    """s_l <= min(R_l - r_{l-1}, 2 d); the GNH has rank at most d."""
    if num_observations is None:
        return available
    return min(available, 2 * num_observations)


def _solve(
    operator: Operator,
    dim: int,
    threshold: float,
    cap: int,
    tol: float,
    max_subspace_factor: int,
    seed: int,
    project=None,
) -> EigenpairResult:
    if threshold <= 0:
        raise ConfigError(f"Truncation threshold must be positive, got {threshold}")
    max_subspace = min(dim, max(max_subspace_factor * cap, cap + 10))
    return lanczos_eigsh(
        operator,
        dim,
        threshold=threshold,
        max_rank=cap,
        tol=tol,
        max_subspace=max_subspace,
        project=project,
        seed=seed,
    )


def build_base_lis(
    operator: Operator,
    hierarchy: LevelHierarchy,
    threshold: float = 1e-2,
    num_observations: int | None = None,
    tol: float = 1e-8,
    max_subspace_factor: int = 4,
    seed: int = 0,
) -> HierarchicalLisBasis:
    """Level-0 basis from the eigenpairs of the averaged GNH above ``threshold``."""
    dim = hierarchy.param_dim[0]
    pairs = _solve(
        operator, dim, threshold, rank_cap(dim, num_observations), tol, max_subspace_factor, seed
    )
    if pairs.rank == 0:
        logger.warning(
            f"No eigenvalue of the level-0 Gauss-Newton Hessian exceeds {threshold:g}; "
            "the LIS is empty"
        )
    block = LisLevelBlock(
        level=0,
        z_coarse=np.zeros((0, pairs.rank)),
        z_fine=pairs.eigenvectors,
        eigenvalues=pairs.eigenvalues,
    )
    logger.info(f"Level 0: base LIS of rank {pairs.rank} after {pairs.iterations} Lanczos steps")
    return HierarchicalLisBasis(hierarchy, (block,), 0)


def lift_basis(prev: HierarchicalLisBasis) -> HierarchicalLisBasis:
    """Psi_{l,c}: the level-(l-1) basis padded with zeros. No data is copied."""
    if prev.top_level + 1 >= prev.hierarchy.num_levels:
        raise UsageError(f"Level {prev.top_level} is the finest level; nothing to lift to")
    return prev.lifted()


def enrich(
    lifted: HierarchicalLisBasis,
    operator: Operator,
    threshold: float = 1e-2,
    num_observations: int | None = None,
    tol: float = 1e-8,
    max_subspace_factor: int = 4,
    seed: int = 0,
) -> HierarchicalLisBasis:
    """Add the leading eigenvectors of (I - Pi) H (I - Pi), Pi the lifted projector.

    Returns the level-l basis [Psi_{l,c}, Psi_{l,f}].
    """
    if not lifted.is_lifted:
        raise UsageError("enrich expects a basis lifted to the next level")
    level = lifted.level
    hierarchy = lifted.hierarchy
    dim = hierarchy.param_dim[level]

    def deflate(x):
        return x - lifted.project(x)

    def deflated(x):
        return deflate(operator(deflate(x)))

    cap = rank_cap(dim - lifted.rank, num_observations)
    pairs = _solve(
        deflated, dim, threshold, cap, tol, max_subspace_factor, seed, project=deflate
    )
    vectors = deflate(pairs.eigenvectors)
    if pairs.rank:
        vectors /= np.linalg.norm(vectors, axis=0, keepdims=True)
    r_coarse = hierarchy.param_dim[level - 1]
    block = LisLevelBlock(
        level=level,
        z_coarse=vectors[:r_coarse],
        z_fine=vectors[r_coarse:],
        eigenvalues=pairs.eigenvalues,
    )
    logger.info(
        f"Level {level}: added {pairs.rank} directions to a lifted basis of rank {lifted.rank}"
    )
    return lifted.with_block(block)


def single_level_lis(
    operator: Operator,
    dim: int,
    threshold: float = 1e-2,
    num_observations: int | None = None,
    tol: float = 1e-8,
    max_subspace_factor: int = 4,
    seed: int = 0,
) -> EigenpairResult:
    """Non-recursive LIS of one level, for comparison with the hierarchical one."""
    return _solve(
        operator, dim, threshold, rank_cap(dim, num_observations), tol, max_subspace_factor, seed
    )
