from dataclasses import dataclass

import numpy as np

from sampler_errors import DimensionError

from .HierarchicalLisBasis import HierarchicalLisBasis


@dataclass(frozen=True, eq=False)
class DiliOperatorSet:
    """Operators A = Psi A_r Psi^T + a_perp (I - Pi) and B alike, on one level.

    A_r and B_r share the eigenvectors of the LIS covariance sigma_r, so they
    commute and A_r^2 + B_r^2 = I. ``xi`` is B_r^{-2}.
    """

    level: int
    basis: HierarchicalLisBasis
    a_r: np.ndarray
    b_r: np.ndarray
    xi: np.ndarray
    a_perp: float
    b_perp: float
    time_step: float
    complement_time_step: float
    sigma_r: np.ndarray

    def __post_init__(self):
        rank = self.basis.rank
        for name in ("a_r", "b_r", "xi", "sigma_r"):
            matrix = np.asarray(getattr(self, name), dtype=float).reshape(rank, rank)
            matrix.flags.writeable = False
            object.__setattr__(self, name, matrix)
        if self.basis.level != self.level:
            raise DimensionError(
                f"Level-{self.level} operators built on a level-{self.basis.level} basis"
            )

    @property
    def rank(self) -> int:
        return self.basis.rank

    @property
    def param_dim(self) -> int:
        return self.basis.param_dim

    def _apply(self, x: np.ndarray, reduced: np.ndarray, scalar: float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.rank == 0:
            return scalar * x
        coords = self.basis.apply_transpose(x)
        return scalar * x + self.basis.apply(
            reduced @ coords - scalar * coords
        )

    def apply_a(self, x: np.ndarray) -> np.ndarray:
        return self._apply(x, self.a_r, self.a_perp)

    def apply_b(self, x: np.ndarray) -> np.ndarray:
        return self._apply(x, self.b_r, self.b_perp)

    def dense_a(self) -> np.ndarray:
        return self.apply_a(np.eye(self.param_dim))

    def dense_b(self) -> np.ndarray:
        return self.apply_b(np.eye(self.param_dim))
