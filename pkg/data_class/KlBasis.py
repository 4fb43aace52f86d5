from dataclasses import dataclass, field

import numpy as np

from sampler_errors import DimensionError


@dataclass(frozen=True, eq=False)
class KlBasis:
    """Truncated Karhunen-Loeve basis of the prior on one level's nodal grid.

    ``eigenfunctions`` has one column per mode and one row per grid node.
    Nodes are numbered x-fastest on a uniform ``(cells_per_side + 1)^2`` grid.
    """

    level: int
    cells_per_side: int
    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray
    mean: np.ndarray
    degenerate_pairs: int = 0
    scaled_modes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        eigenvalues = np.asarray(self.eigenvalues, dtype=float)
        eigenfunctions = np.asarray(self.eigenfunctions, dtype=float)
        mean = np.asarray(self.mean, dtype=float)
        num_nodes = (self.cells_per_side + 1) ** 2
        if eigenfunctions.shape != (num_nodes, eigenvalues.shape[0]):
            raise DimensionError(
                f"Eigenfunction array has shape {eigenfunctions.shape}, expected "
                f"({num_nodes}, {eigenvalues.shape[0]})"
            )
        if mean.shape != (num_nodes,):
            raise DimensionError(f"Mean has shape {mean.shape}, expected ({num_nodes},)")
        if np.any(eigenvalues < 0) or np.any(np.diff(eigenvalues) > 0):
            raise DimensionError("KL eigenvalues must be non-negative and descending")
        object.__setattr__(self, "eigenvalues", eigenvalues)
        object.__setattr__(self, "eigenfunctions", eigenfunctions)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(
            self, "scaled_modes", eigenfunctions * np.sqrt(eigenvalues)[np.newaxis, :]
        )

    @property
    def param_dim(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def num_nodes(self) -> int:
        return self.eigenfunctions.shape[0]

    def truncated(self, num_modes: int) -> "KlBasis":
        if num_modes > self.param_dim:
            raise DimensionError(
                f"Cannot keep {num_modes} modes of a {self.param_dim}-mode basis"
            )
        return KlBasis(
            level=self.level,
            cells_per_side=self.cells_per_side,
            eigenvalues=self.eigenvalues[:num_modes],
            eigenfunctions=self.eigenfunctions[:, :num_modes],
            mean=self.mean,
            degenerate_pairs=self.degenerate_pairs,
        )
