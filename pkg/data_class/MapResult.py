from dataclasses import dataclass, field
from typing import List

from .WhitenedVector import WhitenedVector


@dataclass(frozen=True, eq=False)
class MapResult:
    """Outcome of the MAP search; ``converged`` is the warning flag."""

    point: WhitenedVector
    converged: bool
    iterations: int
    gradient_norm: float
    objective_history: List[float] = field(default_factory=list)
