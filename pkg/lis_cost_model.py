"""Storage and construction cost of hierarchical versus single-level LIS bases."""

from typing import List, Sequence

import numpy as np

from data_class.LevelHierarchy import LevelHierarchy
from data_class.LisCostSummary import LisCostSummary
from sampler_errors import DimensionError


def reduction_bound(growth: float, decay: float, finest_level: int, c: float) -> float:
    """(1/c) min(L+1, 1/(1 - e^{-|growth - decay|})) e^{-min(growth, decay) L}."""
    gap = abs(growth - decay)
    geometric = finest_level + 1.0 if gap == 0 else min(finest_level + 1.0, 1.0 / -np.expm1(-gap))
    return float(geometric * np.exp(-min(growth, decay) * finest_level) / c)


def _slope_through_origin(values: np.ndarray) -> float:
    """Least-squares b in log(values_l / values_0) = b l."""
    levels = np.arange(values.shape[0], dtype=float)
    if values.shape[0] < 2:
        return float("nan")
    return float(levels @ np.log(values / values[0]) / (levels @ levels))


def fit_rank_decay(added_ranks: Sequence[int]) -> float:
    """Largest beta_r with s_l <= s_0 e^{-beta_r l} for every level."""
    added = np.asarray(added_ranks, dtype=float)
    rates = [
        -np.log(added[level] / added[0]) / level
        for level in range(1, added.shape[0])
        if added[level] > 0
    ]
    if added.shape[0] < 2 or added[0] <= 0:
        return float("nan")
    return float(min(rates)) if rates else float("inf")


def cost_model(
    hierarchy: LevelHierarchy,
    added_ranks: Sequence[int],
    single_rank: int,
    theta_c: float = 1.0,
) -> LisCostSummary:
    """Exact storage/build costs and the geometric-series upper bounds.

    Args:
        hierarchy: Levels 0..L; only R_l and M_l are used.
        added_ranks: s_l for l = 0..L.
        single_rank: Rank of the single-level LIS on level L.
        theta_c: Exponent of the forward solve cost M_l^theta_c.
    """
    added = np.asarray(added_ranks, dtype=float)
    if added.shape[0] != hierarchy.num_levels:
        raise DimensionError(
            f"{added.shape[0]} added ranks for a hierarchy with {hierarchy.num_levels} levels"
        )
    finest = hierarchy.finest_level
    param_dims = np.asarray(hierarchy.param_dim, dtype=float)
    solve_costs = np.asarray(hierarchy.fem_dof, dtype=float) ** theta_c

    beta_p = _slope_through_origin(param_dims)
    beta_m = _slope_through_origin(np.asarray(hierarchy.fem_dof, dtype=float))
    beta_r = fit_rank_decay(added)
    c = single_rank / added[0] if added[0] > 0 else float("nan")

    if finest == 0 or not np.isfinite(c) or np.isnan(beta_r):
        bound_storage = bound_build = 1.0 / c if finest == 0 and np.isfinite(c) else float("nan")
    else:
        bound_storage = reduction_bound(beta_p, beta_r, finest, c)
        bound_build = reduction_bound(beta_m * theta_c, beta_r, finest, c)

    return LisCostSummary(
        finest_level=finest,
        zeta_multi=float(param_dims @ added),
        zeta_single=float(param_dims[-1] * single_rank),
        chi_multi=float(solve_costs @ added),
        chi_single=float(solve_costs[-1] * single_rank),
        beta_p=beta_p,
        beta_r=beta_r,
        beta_m=beta_m,
        c=float(c),
        bound_multi_storage=bound_storage,
        bound_multi_build=bound_build,
    )


def storage_reduction_factors(
    hierarchy: LevelHierarchy,
    added_ranks: Sequence[int],
    single_ranks: Sequence[int],
    theta_c: float = 1.0,
) -> List[float]:
    """zeta_multi / zeta_single on every level l, treating l as the finest level."""
    return [
        cost_model(
            hierarchy.truncated(level + 1), added_ranks[: level + 1], single_ranks[level], theta_c
        ).storage_ratio
        for level in range(hierarchy.num_levels)
    ]
