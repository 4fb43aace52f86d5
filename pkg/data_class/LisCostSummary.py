from dataclasses import asdict, dataclass
from typing import Any, Dict

import numpy as np


@dataclass(frozen=True)
class LisCostSummary:
    """Storage and build cost of the hierarchical LIS against a single-level LIS."""

    finest_level: int
    zeta_multi: float
    zeta_single: float
    chi_multi: float
    chi_single: float
    beta_p: float
    beta_r: float
    beta_m: float
    c: float
    bound_multi_storage: float
    bound_multi_build: float

    @property
    def storage_ratio(self) -> float:
        return self.zeta_multi / self.zeta_single if self.zeta_single else float("nan")

    @property
    def build_ratio(self) -> float:
        return self.chi_multi / self.chi_single if self.chi_single else float("nan")

    def to_dict(self) -> Dict[str, Any]:
        summary = asdict(self)
        summary["storage_ratio"] = self.storage_ratio
        summary["build_ratio"] = self.build_ratio
        return {
            key: (float(value) if np.isfinite(value) else None)
            if isinstance(value, float)
            else value
            for key, value in summary.items()
        }
