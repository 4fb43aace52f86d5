from dataclasses import dataclass

import numpy as np

from sampler_errors import DimensionError

from .WhitenedVector import WhitenedVector


@dataclass(frozen=True, eq=False)
class LaplaceReference:
    """Gaussian N(v_MAP, (I + H_r)^{-1}) with H_r the truncated GNH at the MAP point."""

    level: int
    map_point: WhitenedVector
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    map_converged: bool = True
    gradient_norm: float = 0.0

    def __post_init__(self):
        eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        eigenvectors = np.asarray(self.eigenvectors, dtype=float).reshape(
            self.map_point.dim, eigenvalues.shape[0]
        )
        if np.any(eigenvalues <= 0) or np.any(np.diff(eigenvalues) > 0):
            raise DimensionError("Laplace eigenvalues must be positive and descending")
        object.__setattr__(self, "eigenvalues", eigenvalues)
        object.__setattr__(self, "eigenvectors", eigenvectors)

    @property
    def rank(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def param_dim(self) -> int:
        return self.map_point.dim

    def covariance(self) -> np.ndarray:
        """Dense (I + H_r)^{-1}; for tests and small problems."""
        psi = self.eigenvectors
        shrink = 1.0 - 1.0 / (1.0 + self.eigenvalues)
        return np.eye(self.param_dim) - (psi * shrink) @ psi.T
