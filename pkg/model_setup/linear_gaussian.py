"""Linear forward model with Gaussian noise: closed-form posteriors on every level.

Level l observes F_l(v) = G[:, :R_l] v and reports Q_l(v) = c[:R_l] . v, so
the exact posterior N(m_l, C_l) and E[Q_l] = c . m_l are available.
"""

from typing import List, Tuple

import numpy as np

from data_class.ForwardSolution import ForwardSolution
from data_class.LevelHierarchy import LevelHierarchy
from data_class.ObservationSetup import ObservationSetup
from data_class.WhitenedVector import WhitenedVector
from model_setup.forward_model import ForwardModel


class LinearGaussianModel(ForwardModel):
    """F(v) = G v, Q(v) = c . v on one level."""

    def __init__(
        self,
        level: int,
        operator: np.ndarray,
        qoi_weights: np.ndarray,
        observations: ObservationSetup | None = None,
    ):
        operator = np.asarray(operator, dtype=float)
        super().__init__(level, operator.shape[1], observations)
        self.operator = operator
        self.qoi_weights = np.asarray(qoi_weights, dtype=float)

    @property
    def num_observations(self) -> int:
        return self.operator.shape[0]

    def solve_observe(self, v: WhitenedVector) -> ForwardSolution:
        self.check_parameter(v)
        return ForwardSolution(
            parameter=v,
            observables=self.operator @ v.coeffs,
            qoi=float(self.qoi_weights @ v.coeffs),
        )

    def jacobian_apply(self, solution: ForwardSolution, dv: np.ndarray) -> np.ndarray:
        return self.operator @ dv

    def jacobian_transpose_apply(self, solution: ForwardSolution, w: np.ndarray) -> np.ndarray:
        return self.operator.T @ w

    def posterior(self) -> Tuple[np.ndarray, np.ndarray]:
        """Mean and covariance of N(0, I) prior times the Gaussian likelihood."""
        obs = self._require_data()
        precision = np.eye(self.param_dim) + self.operator.T @ self.operator / obs.sigma**2
        covariance = np.linalg.inv(precision)
        mean = covariance @ (self.operator.T @ obs.data) / obs.sigma**2
        return mean, 0.5 * (covariance + covariance.T)

    def posterior_qoi_mean(self) -> float:
        return float(self.qoi_weights @ self.posterior()[0])


def build_linear_gaussian_models(
    hierarchy: LevelHierarchy,
    num_observations: int = 10,
    operator_decay: float = 1.0,
    seed: int = 7,
) -> List[LinearGaussianModel]:
    """Nested linear models whose columns decay like j^{-decay}, so coarse levels approximate fine ones."""
    rng = np.random.default_rng(seed)
    finest = hierarchy.param_dim[-1]
    decay = np.arange(1, finest + 1, dtype=float) ** (-operator_decay)
    operator = rng.standard_normal((num_observations, finest)) * decay
    qoi_weights = decay.copy()
    return [
        LinearGaussianModel(level, operator[:, :r], qoi_weights[:r])
        for level, r in enumerate(hierarchy.param_dim)
    ]
