from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .HierarchicalLisBasis import HierarchicalLisBasis
from .LaplaceReference import LaplaceReference


@dataclass
class LisBuildResult:
    """Hierarchical LIS with the Laplace references it was built from.

    ``single_ranks`` and the timings are empty when the result was read back
    from a LIS file.
    """

    basis: HierarchicalLisBasis
    references: List[LaplaceReference]
    threshold: float
    num_gnh_samples: List[int]
    single_ranks: List[Optional[int]] = field(default_factory=list)
    build_seconds: List[float] = field(default_factory=list)
    single_build_seconds: List[float] = field(default_factory=list)
    build_seconds_without_recycling: List[float] = field(default_factory=list)
    gnh_applies: Dict[str, List[int]] = field(default_factory=dict)

    @property
    def num_levels(self) -> int:
        return len(self.basis.blocks)

    @property
    def added(self):
        return self.basis.added

    @property
    def ranks(self):
        return self.basis.ranks
