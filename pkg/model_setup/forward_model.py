from abc import ABC, abstractmethod
import copy
from typing import Tuple

import numpy as np

from data_class.ForwardSolution import ForwardSolution
from data_class.ObservationSetup import ObservationSetup
from data_class.WhitenedVector import WhitenedVector
from sampler_errors import DimensionError, UsageError


class ForwardModel(ABC):
    """Parameter-to-observable map of one level together with its data.

    Subclasses provide the solve and the matrix-free Jacobian actions; the
    misfit, gradient and Gauss-Newton Hessian action are defined here once.
    """

    def __init__(self, level: int, param_dim: int, observations: ObservationSetup | None = None):
        self.level = level
        self.param_dim = param_dim
        self.observations = observations

    @property
    @abstractmethod
    def num_observations(self) -> int: ...

    @abstractmethod
    def solve_observe(self, v: WhitenedVector) -> ForwardSolution: ...

    @abstractmethod
    def jacobian_apply(self, solution: ForwardSolution, dv: np.ndarray) -> np.ndarray:
        """J(v) dv."""

    @abstractmethod
    def jacobian_transpose_apply(self, solution: ForwardSolution, w: np.ndarray) -> np.ndarray:
        """J(v)^T w."""

    def with_observations(self, observations: ObservationSetup) -> "ForwardModel":
        if observations.num_observations != self.num_observations:
            raise DimensionError(
                f"Model observes {self.num_observations} values, data has {observations.num_observations}"
            )
        clone = copy.copy(self)
        clone.observations = observations
        return clone

    def check_parameter(self, v: WhitenedVector) -> None:
        if v.level != self.level or v.dim != self.param_dim:
            raise DimensionError(
                f"Level-{self.level} model expects {self.param_dim} coefficients, "
                f"got level {v.level} with {v.dim}"
            )

    def _require_data(self) -> ObservationSetup:
        if self.observations is None:
            raise UsageError(f"No data attached to the level-{self.level} model")
        return self.observations

    def misfit_from(self, solution: ForwardSolution) -> float:
        """eta = 1/2 (y - F)^T Gamma_obs^{-1} (y - F)."""
        obs = self._require_data()
        residual = (obs.data - solution.observables) / obs.sigma
        return float(0.5 * residual @ residual)

    def misfit(self, v: WhitenedVector) -> float:
        return self.misfit_from(self.solve_observe(v))

    def qoi(self, v: WhitenedVector) -> float:
        return self.solve_observe(v).qoi

    def evaluate(self, v: WhitenedVector) -> Tuple[float, float]:
        """Misfit and QoI from a single solve."""
        solution = self.solve_observe(v)
        return self.misfit_from(solution), solution.qoi

    def misfit_gradient(self, solution: ForwardSolution) -> np.ndarray:
        obs = self._require_data()
        weighted = (solution.observables - obs.data) / obs.sigma**2
        return self.jacobian_transpose_apply(solution, weighted)

    def gnh_apply(self, solution: ForwardSolution | WhitenedVector, dv: np.ndarray) -> np.ndarray:
        """J^T Gamma_obs^{-1} J dv at the solution's parameter."""
        obs = self._require_data()
        if isinstance(solution, WhitenedVector):
            solution = self.solve_observe(solution)
        dv = np.asarray(dv, dtype=float)
        if dv.shape != (self.param_dim,):
            raise DimensionError(f"dv has shape {dv.shape}, expected ({self.param_dim},)")
        return self.jacobian_transpose_apply(
            solution, self.jacobian_apply(solution, dv) / obs.sigma**2
        )
