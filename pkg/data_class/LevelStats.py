from dataclasses import asdict, dataclass, field
from typing import Any, Dict

from sampler_errors import DimensionError


@dataclass
class LevelStats:
    """Per-level summary: Y_l, the variance and IACT of its summand, and the cost per step.

    ``variance`` is Var(Q_0) on level 0 and Var(D_l) above; ``num_samples``
    counts retained samples over all chains of the level.
    """

    level: int
    mean: float
    variance: float
    iact: float
    num_samples: int
    cost_per_step: float
    kernel: str = ""
    num_chains: int = 1
    acceptance_rate: float = 0.0
    param_iact: float = float("nan")
    fine_qoi_mean: float = float("nan")
    coarse_qoi_mean: float = float("nan")
    variance_fine: float = float("nan")
    variance_coarse: float = float("nan")
    covariance: float = float("nan")
    num_steps: int = 0
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.variance < 0:
            raise DimensionError(f"Level {self.level}: negative variance {self.variance}")
        if self.iact < 1:
            raise DimensionError(f"Level {self.level}: IACT {self.iact} below one")

    @property
    def effective_sample_size(self) -> float:
        return self.num_samples / self.iact

    @property
    def estimator_variance(self) -> float:
        """tau Var / N, the variance of Y_l."""
        return self.iact * self.variance / self.num_samples if self.num_samples else float("inf")

    @property
    def bias_proxy(self) -> float:
        return abs(self.mean)

    @property
    def total_cost(self) -> float:
        """Wall-clock seconds spent in this level's chains, burn-in included."""
        return self.num_steps * self.cost_per_step

    def to_dict(self) -> Dict[str, Any]:
        summary = asdict(self)
        summary["effective_sample_size"] = self.effective_sample_size
        summary["estimator_variance"] = self.estimator_variance
        summary["bias_proxy"] = self.bias_proxy
        summary["total_cost"] = self.total_cost
        return summary
