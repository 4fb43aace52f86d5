from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np

from sampler_errors import DimensionError


@dataclass(frozen=True, eq=False)
class ChainRecord:
    """Post-burn-in output of a single-level Metropolis-Hastings chain.

    ``misfits``, ``qois``, ``accepted`` and ``param_trace`` have one row per
    retained step; ``states`` keeps every ``state_thinning``-th one.
    """

    level: int
    kernel: str
    states: np.ndarray
    misfits: np.ndarray
    qois: np.ndarray
    accepted: np.ndarray
    param_trace: np.ndarray
    num_steps: int
    burn_in: int
    seconds_per_step: float
    solver_failures: int = 0
    state_thinning: int = 1
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        length = len(self.misfits)
        if not (len(self.qois) == len(self.accepted) == len(self.param_trace) == length):
            raise DimensionError("Chain traces have inconsistent lengths")
        if self.acceptance_count > length:
            raise DimensionError("More acceptances than steps")

    @property
    def num_samples(self) -> int:
        return len(self.misfits)

    @property
    def acceptance_count(self) -> int:
        return int(np.sum(self.accepted))

    @property
    def acceptance_rate(self) -> float:
        return self.acceptance_count / self.num_samples if self.num_samples else 0.0
