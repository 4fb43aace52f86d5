"""pCN, DILI and coupled (coarse-pooled, fine-conditional) proposals and acceptance."""

import logging
import math
from typing import Optional

import numpy as np

from data_class.ConditionalFactors import ConditionalFactors
from data_class.DiliOperatorSet import DiliOperatorSet
from data_class.HierarchicalLisBasis import HierarchicalLisBasis
from sampler_errors import ConfigError, DimensionError, NumericalError, UsageError

logger = logging.getLogger(__name__)


def check_pcn_coefficient(a: float) -> float:
    if not -1.0 < a < 1.0:
        raise ConfigError(f"The pCN coefficient must lie in (-1, 1), got {a}")
    return float(a)


def pcn_propose(v: np.ndarray, a: float, rng: np.random.Generator) -> np.ndarray:
    """v' = a v + sqrt(1 - a^2) xi."""
    a = check_pcn_coefficient(a)
    v = np.asarray(v, dtype=float)
    return a * v + math.sqrt(1.0 - a * a) * rng.standard_normal(v.shape[0])


def complement_coefficients(time_step: float) -> tuple[float, float]:
    """a = (2 - dt) / (2 + dt) and b = sqrt(1 - a^2)."""
    a = (2.0 - time_step) / (2.0 + time_step)
    return a, math.sqrt(max(0.0, 1.0 - a * a))


def build_dili_operators(
    sigma_r: np.ndarray,
    basis: HierarchicalLisBasis,
    time_step: float = 1.0,
    complement_time_step: float = 0.1,
) -> DiliOperatorSet:
    """A_r = (2I + dt Sigma_r)^{-1} (2I - dt Sigma_r), B_r = (I - A_r^2)^{1/2}.

    Both are formed from the eigendecomposition of Sigma_r, so they commute.

    Raises:
        ConfigError: Non-positive jump sizes, or B_r / b_perp singular.
        NumericalError: Sigma_r is not symmetric positive definite.
    """
    problems = []
    if not time_step > 0:
        problems.append(f"time_step must be positive, got {time_step}")
    if not complement_time_step > 0:
        problems.append(f"complement_time_step must be positive, got {complement_time_step}")
    if problems:
        raise ConfigError(problems)

    rank = basis.rank
    sigma_r = np.asarray(sigma_r, dtype=float).reshape(rank, rank)
    if not np.allclose(sigma_r, sigma_r.T, atol=1e-10 * max(1.0, np.abs(sigma_r).max(initial=0.0))):
        raise NumericalError("The LIS covariance is not symmetric")
    sigma_r = 0.5 * (sigma_r + sigma_r.T)
    variances, vectors = np.linalg.eigh(sigma_r)
    if rank and variances[0] <= 0:
        raise NumericalError(
            f"The LIS covariance is not positive definite: eigenvalue {variances[0]:.3e}",
            {"offending_eigenvalue": float(variances[0])},
        )

    a_diag = (2.0 - time_step * variances) / (2.0 + time_step * variances)
    b_diag = np.sqrt(np.clip(1.0 - a_diag**2, 0.0, None))
    a_perp, b_perp = complement_coefficients(complement_time_step)
    if rank and b_diag.min() <= 1e-12:
        raise ConfigError(f"B_r is singular for time_step {time_step}")
    if b_perp <= 1e-12:
        raise ConfigError(f"b_perp vanishes for complement_time_step {complement_time_step}")

    return DiliOperatorSet(
        level=basis.level,
        basis=basis,
        a_r=(vectors * a_diag) @ vectors.T,
        b_r=(vectors * b_diag) @ vectors.T,
        xi=(vectors / b_diag**2) @ vectors.T if rank else np.zeros((0, 0)),
        a_perp=a_perp,
        b_perp=b_perp,
        time_step=float(time_step),
        complement_time_step=float(complement_time_step),
        sigma_r=sigma_r,
    )


def dili_propose(
    v: np.ndarray, ops: DiliOperatorSet, rng: np.random.Generator
) -> np.ndarray:
    """v' = A v + B xi."""
    v = np.asarray(v, dtype=float)
    if v.shape != (ops.param_dim,):
        raise DimensionError(f"State of shape {v.shape}, operators act on {ops.param_dim}")
    return ops.apply_a(v) + ops.apply_b(rng.standard_normal(ops.param_dim))


def _acceptance(log_ratio: float, what: str) -> float:
    if math.isnan(log_ratio):
        logger.warning(f"NaN in the {what} acceptance ratio; proposal rejected")
        return 0.0
    return 1.0 if log_ratio >= 0 else math.exp(log_ratio)


def accept_base(eta_current: float, eta_proposed: float) -> float:
    """min{1, exp(eta* - eta')}."""
    return _acceptance(eta_current - eta_proposed, "base-level")


def accept_coupled(
    eta_fine_current: float,
    eta_coarse_current: float,
    eta_fine_proposed: float,
    eta_coarse_proposed: float,
    log_correction: float = 0.0,
) -> float:
    """min{1, exp[(eta_l* - eta_{l-1}*) - (eta_l' - eta_{l-1}') + log_correction]}.

    ``eta_coarse_current`` belongs to the coarse component of the current fine
    state, ``eta_coarse_proposed`` to the pooled candidate.
    """
    log_ratio = (
        (eta_fine_current - eta_coarse_current)
        - (eta_fine_proposed - eta_coarse_proposed)
        + log_correction
    )
    return _acceptance(log_ratio, "coupled")


def precompute_conditional(ops: DiliOperatorSet) -> ConditionalFactors:
    """Factors for sampling the fine block of N(A v*, B^2) given its coarse block.

    Raises:
        UsageError: Level-0 operators.
        NumericalError: P_ff would be indefinite (an eigenvalue of D at most -1).
    """
    basis = ops.basis
    level = ops.level
    if level == 0 or basis.is_lifted:
        raise UsageError("Conditional factors need a level >= 1 basis with its own block")
    block = basis.blocks[-1]
    added = block.added
    r_prev = basis.rank - added
    b_perp = ops.b_perp
    coarse_basis = basis.truncated(level - 1)

    xi_fc = ops.xi[r_prev:, :r_prev]
    xi_ff = ops.xi[r_prev:, r_prev:]
    fine_dim = block.z_fine.shape[0]

    if added:
        u, t = np.linalg.qr(block.z_fine, mode="reduced")
        middle = t @ (b_perp**2 * xi_ff - np.eye(added)) @ t.T
        d, w = np.linalg.eigh(0.5 * (middle + middle.T))
        if np.any(d <= -1.0):
            raise NumericalError(
                f"Level {level}: the fine precision block is indefinite "
                f"(min D = {d.min():.3e}); B_r and b_perp are inconsistent",
                {"d_min": float(d.min())},
            )
        phi = u @ w
    else:
        phi, d, w, t = np.zeros((fine_dim, 0)), np.zeros(0), np.zeros((0, 0)), np.zeros((0, 0))

    # coarse marginal covariance (B^2)_cc = b^2 I + Psi_c (B_r^2 - b^2 I) Psi_c^T
    coarse_rows = np.hstack([coarse_basis.dense(), block.z_coarse])
    if coarse_rows.shape[1]:
        q, r = np.linalg.qr(coarse_rows, mode="reduced")
        excess = ops.b_r @ ops.b_r - b_perp**2 * np.eye(basis.rank)
        inner = r @ excess @ r.T
        marginal_eigenvalues, inner_vectors = np.linalg.eigh(0.5 * (inner + inner.T))
        marginal_vectors = q @ inner_vectors
    else:
        marginal_eigenvalues = np.zeros(0)
        marginal_vectors = np.zeros((coarse_rows.shape[0], 0))

    return ConditionalFactors(
        level=level,
        b_perp=b_perp,
        phi=phi,
        d=d,
        w=w,
        t=t,
        xi_fc=xi_fc,
        xi_ff=xi_ff,
        z_coarse=block.z_coarse,
        coarse_basis=coarse_basis,
        marginal_vectors=marginal_vectors,
        marginal_eigenvalues=marginal_eigenvalues,
    )


def coupled_propose(
    v_current: np.ndarray,
    v_coarse_proposed: np.ndarray,
    ops: DiliOperatorSet,
    factors: ConditionalFactors,
    rng: Optional[np.random.Generator] = None,
    xi: Optional[np.ndarray] = None,
    a_current: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Coarse block from the pool, fine block from the conditional DILI law.

    r_c = v'_c - (A v*)_c, r_f ~ N(-P_ff^{-1} P_fc r_c, P_ff^{-1}) and
    v'_f = (A v*)_f + r_f. ``xi`` replaces the standard-normal draw when given.
    """
    v_coarse_proposed = np.asarray(v_coarse_proposed, dtype=float)
    r_coarse_dim = v_coarse_proposed.shape[0]
    if a_current is None:
        a_current = ops.apply_a(v_current)
    if r_coarse_dim + factors.fine_dim != a_current.shape[0]:
        raise DimensionError(
            f"Coarse block of length {r_coarse_dim} does not fit a level-{ops.level} state"
        )
    if xi is None:
        xi = rng.standard_normal(factors.fine_dim)
    residual_coarse = v_coarse_proposed - a_current[:r_coarse_dim]
    residual_fine = factors.conditional_mean(residual_coarse) + factors.inverse_sqrt_apply(xi)
    return np.concatenate([v_coarse_proposed, a_current[r_coarse_dim:] + residual_fine])


def pcn_coupled_propose(
    v_current: np.ndarray,
    v_coarse_proposed: np.ndarray,
    a: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Coarse block from the pool, pCN on the fine block."""
    r_coarse_dim = np.asarray(v_coarse_proposed).shape[0]
    fine = pcn_propose(np.asarray(v_current, dtype=float)[r_coarse_dim:], a, rng)
    return np.concatenate([v_coarse_proposed, fine])


def coarse_marginal_log_correction(
    v_current: np.ndarray,
    v_proposed: np.ndarray,
    ops: DiliOperatorSet,
    factors: ConditionalFactors,
    a_current: Optional[np.ndarray] = None,
    a_proposed: Optional[np.ndarray] = None,
) -> float:
    """log of N(v*_c) q_c(v'_c | v*) / (N(v'_c) q_c(v*_c | v')).

    q_c is the coarse marginal N((A v)_c, (B^2)_cc) of the DILI kernel. The term
    vanishes when A and B do not couple coarse and fine coordinates.
    """
    r_coarse_dim = factors.marginal_vectors.shape[0]
    if a_current is None:
        a_current = ops.apply_a(v_current)
    if a_proposed is None:
        a_proposed = ops.apply_a(v_proposed)
    coarse_current = np.asarray(v_current)[:r_coarse_dim]
    coarse_proposed = np.asarray(v_proposed)[:r_coarse_dim]
    forward = factors.coarse_marginal_quadform(coarse_proposed - a_current[:r_coarse_dim])
    backward = factors.coarse_marginal_quadform(coarse_current - a_proposed[:r_coarse_dim])
    return float(
        0.5 * (coarse_proposed @ coarse_proposed - coarse_current @ coarse_current)
        - 0.5 * forward
        + 0.5 * backward
    )
