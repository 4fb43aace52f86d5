from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class CrossLevelCovariance:
    """Batch-mean covariance of the level estimates and its normalised form.

    ``ratios[l, k] = Cov(Y_l, Y_k) / max(Var(Y_l), Var(Y_k))``; the variance
    bound for the combined estimator needs ``max_ratio < 1``.
    """

    covariance: np.ndarray
    ratios: np.ndarray
    num_batches: int

    @property
    def max_ratio(self) -> float:
        if self.ratios.shape[0] < 2:
            return 0.0
        off_diagonal = self.ratios[~np.eye(self.ratios.shape[0], dtype=bool)]
        return float(np.max(np.abs(off_diagonal)))

    @property
    def bound_applies(self) -> bool:
        return self.max_ratio < 1.0
