from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np

from sampler_errors import DimensionError


@dataclass(frozen=True, eq=False)
class CoupledChainRecord:
    """Post-burn-in output of a level-l chain paired with pooled level-(l-1) draws.

    Row j holds the fine state V_l^(j) (misfit, QoI) and the coarse draw
    V_{l-1}^(j) (misfit, QoI, pool index); ``differences`` is
    D_l^(j) = Q_l(V_l^(j)) - Q_{l-1}(V_{l-1}^(j)).
    """

    level: int
    kernel: str
    fine_states: np.ndarray
    coarse_states: np.ndarray
    fine_misfits: np.ndarray
    coarse_misfits: np.ndarray
    fine_qois: np.ndarray
    coarse_qois: np.ndarray
    pool_indices: np.ndarray
    accepted: np.ndarray
    param_trace: np.ndarray
    num_steps: int
    burn_in: int
    seconds_per_step: float
    solver_failures: int = 0
    state_thinning: int = 1
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        length = len(self.fine_qois)
        lengths = {
            len(self.fine_misfits),
            len(self.coarse_misfits),
            len(self.coarse_qois),
            len(self.pool_indices),
            len(self.accepted),
            len(self.param_trace),
        }
        if lengths != {length}:
            raise DimensionError("Coupled chain traces have inconsistent lengths")

    @property
    def num_samples(self) -> int:
        return len(self.fine_qois)

    @property
    def differences(self) -> np.ndarray:
        return np.asarray(self.fine_qois) - np.asarray(self.coarse_qois)

    @property
    def acceptance_count(self) -> int:
        return int(np.sum(self.accepted))

    @property
    def acceptance_rate(self) -> float:
        return self.acceptance_count / self.num_samples if self.num_samples else 0.0

    def coupling_violations(self) -> int:
        """Accepted rows whose fine state does not restrict to the coarse draw.

        Only rows with stored states are checked.
        """
        r_coarse = self.coarse_states.shape[1] if self.coarse_states.ndim == 2 else 0
        stored_rows = np.arange(0, self.num_samples, self.state_thinning)[: len(self.fine_states)]
        violations = 0
        for position, row in enumerate(stored_rows):
            if self.accepted[row] and not np.array_equal(
                self.fine_states[position, :r_coarse], self.coarse_states[position]
            ):
                violations += 1
        return violations
