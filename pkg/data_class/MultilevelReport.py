from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .CrossLevelCovariance import CrossLevelCovariance
from .LevelStats import LevelStats
from .RateEstimate import RateEstimate
from .RunStatus import RunStatus
from .SampleAllocation import SampleAllocation
from .SamplerIssue import SamplerIssue


@dataclass
class MultilevelReport:
    """Result of one sampler run: per-level statistics and the combined estimate."""

    mode: str
    levels: List[LevelStats]
    estimate: float
    estimator_variance: float
    variance_bound: float
    cross_level_ratio: float
    bias_estimate: Optional[float] = None
    rates: Optional[RateEstimate] = None
    cross_level: Optional[CrossLevelCovariance] = None
    allocation: Optional[SampleAllocation] = None
    epsilon: Optional[float] = None
    total_cost: float = 0.0
    setup_cost: float = 0.0
    seed: Optional[int] = None
    status: RunStatus = RunStatus.PASS
    issues: List[SamplerIssue] = field(default_factory=list)
    complete: bool = True
    config: Dict[str, Any] = field(default_factory=dict)
    timestamp: str = ""

    def __post_init__(self):
        # a partial report may arrive before every level has run
        if self.levels and self.complete:
            self.estimate = float(sum(stats.mean for stats in self.levels))
        self.status = RunStatus.worst([self.status, *(issue.severity for issue in self.issues)])

    @property
    def standard_error(self) -> float:
        return float(np.sqrt(self.estimator_variance))

    def add_issue(self, issue: SamplerIssue) -> None:
        self.issues.append(issue)
        self.status = self.status.raise_status_level_to(issue.severity)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "timestamp": self.timestamp,
            "seed": self.seed,
            "epsilon": self.epsilon,
            "estimate": self.estimate,
            "estimator_variance": self.estimator_variance,
            "standard_error": self.standard_error,
            "variance_bound": self.variance_bound,
            "cross_level_ratio": self.cross_level_ratio,
            "bias_estimate": self.bias_estimate,
            "total_cost": self.total_cost,
            "setup_cost": self.setup_cost,
            "status": self.status.value,
            "complete": self.complete,
            "levels": [stats.to_dict() for stats in self.levels],
            "rates": self.rates.to_dict() if self.rates else None,
            "cross_level_covariance": (
                self.cross_level.covariance.tolist() if self.cross_level else None
            ),
            "allocation": self.allocation.to_dict() if self.allocation else None,
            "issues": [issue.to_dict() for issue in self.issues],
            "config": self.config,
        }
