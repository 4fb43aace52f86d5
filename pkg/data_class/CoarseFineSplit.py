from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class CoarseFineSplit:
    """Coarse block [0, R_{l-1}) and fine block [R_{l-1}, R_l) of a level-l vector."""

    coarse: np.ndarray
    fine: np.ndarray

    def concatenate(self) -> np.ndarray:
        return np.concatenate([self.coarse, self.fine])
