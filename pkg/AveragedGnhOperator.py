import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import List, Sequence

import numpy as np

from data_class.ForwardSolution import ForwardSolution
from data_class.WhitenedVector import WhitenedVector
from model_setup.forward_model import ForwardModel
from sampler_errors import DimensionError


class AveragedGnhOperator:
    """Sample-averaged Gauss-Newton Hessian (1/K) sum_k H(v_k) of one level.

    The forward solves at the reference samples are done once on construction
    and their factorisations are reused by every application.
    """

    def __init__(
        self,
        model: ForwardModel,
        samples: Sequence[WhitenedVector],
        max_workers: int = 1,
    ):
        self.logger = logging.getLogger(__name__)
        self.model = model
        self.level = model.level
        self.samples = list(samples)
        self.max_workers = max(1, int(max_workers))
        if not self.samples:
            raise DimensionError("The averaged Gauss-Newton Hessian needs at least one sample")
        for sample in self.samples:
            model.check_parameter(sample)
        self.solutions: List[ForwardSolution] = self._solve_all()
        self.num_applies = 0

    @property
    def dim(self) -> int:
        return self.model.param_dim

    @property
    def num_samples(self) -> int:
        return len(self.samples)

    def _solve_all(self) -> List[ForwardSolution]:
        if self.max_workers == 1:
            return [self.model.solve_observe(sample) for sample in self.samples]

        solutions: List[ForwardSolution | None] = [None] * len(self.samples)
        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            future_to_index = {}
            for index, sample in enumerate(self.samples):
                future = executor.submit(self.model.solve_observe, sample)
                future_to_index[future] = index

            for future in as_completed(future_to_index):
                solutions[future_to_index[future]] = future.result()

        self.logger.debug(
            f"Level {self.level}: solved at {len(solutions)} reference samples"
        )
        return solutions

    def apply(self, dv: np.ndarray) -> np.ndarray:
        dv = np.asarray(dv, dtype=float)
        if dv.shape != (self.dim,):
            raise DimensionError(f"dv has shape {dv.shape}, expected ({self.dim},)")
        self.num_applies += 1

        if self.max_workers == 1:
            actions = [self.model.gnh_apply(solution, dv) for solution in self.solutions]
        else:
            with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
                actions = list(
                    executor.map(lambda solution: self.model.gnh_apply(solution, dv), self.solutions)
                )
        # summed in sample order so the result does not depend on scheduling
        return np.sum(actions, axis=0) / len(actions)

    __call__ = apply

    def dense(self) -> np.ndarray:
        """Explicitly assembled matrix; for tests and small problems."""
        return np.column_stack([self.apply(e) for e in np.eye(self.dim)])
