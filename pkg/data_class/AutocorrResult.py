from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class AutocorrResult:
    """Integrated autocorrelation time with the window and curve it was read from."""

    tau: float
    window: int
    curve: np.ndarray
    num_samples: int
    degenerate: bool = False

    @property
    def effective_sample_size(self) -> float:
        return self.num_samples / self.tau
