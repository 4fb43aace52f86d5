from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class EigenpairResult:
    """Leading eigenpairs from the iterative eigensolver."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    iterations: int
    truncated_by_rank: bool = False

    @property
    def rank(self) -> int:
        return self.eigenvalues.shape[0]
