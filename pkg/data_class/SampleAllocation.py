from dataclasses import asdict, dataclass
from typing import Any, Dict, List


@dataclass(frozen=True)
class SampleAllocation:
    """Samples per level for a target tolerance and the costs it implies."""

    num_samples: List[int]
    continuous: List[float]
    epsilon: float
    cross_level_ratio: float
    predicted_cost: float
    variance_bound: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
