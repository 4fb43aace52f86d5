"""Stateful proposal kernels used by the chain drivers.

Every kernel holds an immutable operator snapshot. Adaptive kernels collect
running statistics of the LIS coordinates during burn-in and swap in a new
snapshot every ``adapt_interval`` accepted states; ``freeze()`` ends adaptation.
"""

import logging
import math
from typing import Optional

import numpy as np

from data_class.ConditionalFactors import ConditionalFactors
from data_class.DiliOperatorSet import DiliOperatorSet
from dili_proposal import (
    build_dili_operators,
    check_pcn_coefficient,
    coarse_marginal_log_correction,
    coupled_propose,
    dili_propose,
    pcn_coupled_propose,
    pcn_propose,
    precompute_conditional,
)


def floor_covariance(covariance: np.ndarray, floor: float) -> np.ndarray:
    """Symmetrise and lift eigenvalues to at least ``floor`` times the largest one."""
    if covariance.shape[0] == 0:
        return covariance
    covariance = 0.5 * (covariance + covariance.T)
    values, vectors = np.linalg.eigh(covariance)
    minimum = floor * max(values[-1], np.finfo(float).tiny)
    return (vectors * np.maximum(values, minimum)) @ vectors.T


class CovarianceAdapter:
    """Running mean and covariance (Welford) mixed with an initial covariance.

    The estimate is (w0 Sigma_0 + n Sigma_n) / (w0 + n).
    """

    def __init__(self, initial: np.ndarray, prior_weight: float = 100.0, floor: float = 1e-8):
        self.initial = np.asarray(initial, dtype=float)
        self.prior_weight = float(prior_weight)
        self.floor = floor
        dim = self.initial.shape[0]
        self.count = 0
        self.mean = np.zeros(dim)
        self.scatter = np.zeros((dim, dim))

    def update(self, coords: np.ndarray) -> None:
        self.count += 1
        delta = coords - self.mean
        self.mean += delta / self.count
        self.scatter += np.outer(delta, coords - self.mean)

    def covariance(self) -> np.ndarray:
        if self.count < 2:
            return floor_covariance(self.initial, self.floor)
        empirical = self.scatter / (self.count - 1)
        mixed = (self.prior_weight * self.initial + self.count * empirical) / (
            self.prior_weight + self.count
        )
        return floor_covariance(mixed, self.floor)


class PcnKernel:
    name = "pCN"
    adaptive = False

    def __init__(self, coefficient: float = 0.95):
        self.coefficient = check_pcn_coefficient(coefficient)

    def propose(self, v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return pcn_propose(v, self.coefficient, rng)

    def record(self, v: np.ndarray, accepted: bool) -> None:
        pass

    def freeze(self) -> None:
        pass

    def clone(self) -> "PcnKernel":
        return PcnKernel(self.coefficient)


class DiliKernel:
    name = "DILI"

    def __init__(
        self,
        operators: DiliOperatorSet,
        adapt: bool = False,
        adapt_interval: int = 100,
        adapt_prior_weight: float = 100.0,
        covariance_floor: float = 1e-8,
    ):
        self.logger = logging.getLogger(__name__)
        self.initial_operators = operators
        self.operators = operators
        self.adapt_interval = adapt_interval
        self.adapt_prior_weight = adapt_prior_weight
        self.covariance_floor = covariance_floor
        self.adaptive = adapt and operators.rank > 0
        self.adapter = (
            CovarianceAdapter(operators.sigma_r, adapt_prior_weight, covariance_floor)
            if self.adaptive
            else None
        )
        self.accepted_since_update = 0
        self.num_updates = 0

    def propose(self, v: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        return dili_propose(v, self.operators, rng)

    def record(self, v: np.ndarray, accepted: bool) -> None:
        if not self.adaptive:
            return
        self.adapter.update(self.operators.basis.apply_transpose(v))
        if accepted:
            self.accepted_since_update += 1
        if self.accepted_since_update >= self.adapt_interval:
            self.accepted_since_update = 0
            self._refresh()

    def _refresh(self) -> None:
        ops = self.operators
        self.operators = build_dili_operators(
            self.adapter.covariance(), ops.basis, ops.time_step, ops.complement_time_step
        )
        self.num_updates += 1
        self.logger.debug(
            f"Level {ops.level}: LIS covariance updated from {self.adapter.count} states"
        )

    def freeze(self) -> None:
        if self.adaptive:
            self.logger.debug(
                f"Level {self.operators.level}: adaptation frozen after {self.num_updates} updates"
            )
        self.adaptive = False

    def clone(self) -> "DiliKernel":
        return DiliKernel(
            self.initial_operators,
            self.adapter is not None,
            self.adapt_interval,
            self.adapt_prior_weight,
            self.covariance_floor,
        )


class CoupledPcnKernel(PcnKernel):
    """pCN on the fine block; the coarse block comes from the pool."""

    name = "coupled pCN"

    def propose_coupled(
        self, v: np.ndarray, v_coarse: np.ndarray, rng: np.random.Generator
    ) -> np.ndarray:
        return pcn_coupled_propose(v, v_coarse, self.coefficient, rng)

    def log_correction(self, v: np.ndarray, v_proposed: np.ndarray) -> float:
        return 0.0

    def clone(self) -> "CoupledPcnKernel":
        return CoupledPcnKernel(self.coefficient)


class CoupledDiliKernel(DiliKernel):
    """Conditional DILI on the fine block; the coarse block comes from the pool."""

    name = "coupled DILI"

    def __init__(
        self,
        operators: DiliOperatorSet,
        coarse_marginal_correction: bool = True,
        adapt: bool = False,
        adapt_interval: int = 100,
        adapt_prior_weight: float = 100.0,
        covariance_floor: float = 1e-8,
        factors: Optional[ConditionalFactors] = None,
    ):
        super().__init__(operators, adapt, adapt_interval, adapt_prior_weight, covariance_floor)
        self.coarse_marginal_correction = coarse_marginal_correction
        self.initial_factors = factors if factors is not None else precompute_conditional(operators)
        self.factors = self.initial_factors
        self._last_current = None
        self._last_a_current = None

    def _a_current(self, v: np.ndarray) -> np.ndarray:
        if self._last_current is not v:
            self._last_current = v
            self._last_a_current = self.operators.apply_a(v)
        return self._last_a_current

    def propose_coupled(
        self, v: np.ndarray, v_coarse: np.ndarray, rng: np.random.Generator
    ) -> np.ndarray:
        return coupled_propose(
            v, v_coarse, self.operators, self.factors, rng, a_current=self._a_current(v)
        )

    def log_correction(self, v: np.ndarray, v_proposed: np.ndarray) -> float:
        if not self.coarse_marginal_correction:
            return 0.0
        value = coarse_marginal_log_correction(
            v, v_proposed, self.operators, self.factors, a_current=self._a_current(v)
        )
        return value if math.isfinite(value) else float("nan")

    def _refresh(self) -> None:
        super()._refresh()
        self.factors = precompute_conditional(self.operators)
        self._last_current = None

    def clone(self) -> "CoupledDiliKernel":
        return CoupledDiliKernel(
            self.initial_operators,
            self.coarse_marginal_correction,
            self.adapter is not None,
            self.adapt_interval,
            self.adapt_prior_weight,
            self.covariance_floor,
            factors=self.initial_factors,
        )
