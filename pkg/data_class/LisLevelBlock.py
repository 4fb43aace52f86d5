from dataclasses import dataclass

import numpy as np

from sampler_errors import DimensionError


@dataclass(frozen=True, eq=False)
class LisLevelBlock:
    """Columns added to the likelihood-informed subspace on one level.

    ``z_coarse`` (R_{l-1} x s_l) and ``z_fine`` ((R_l - R_{l-1}) x s_l) are the
    coarse and fine rows of the new columns. On level 0 ``z_coarse`` has no rows
    and ``z_fine`` is the whole base block.
    """

    level: int
    z_coarse: np.ndarray
    z_fine: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        eigenvalues = np.asarray(self.eigenvalues, dtype=float).reshape(-1)
        added = eigenvalues.shape[0]
        z_coarse = np.asarray(self.z_coarse, dtype=float)
        z_fine = np.asarray(self.z_fine, dtype=float)
        for name, array in (("z_coarse", z_coarse), ("z_fine", z_fine)):
            if array.ndim != 2 or array.shape[1] != added:
                raise DimensionError(
                    f"Level-{self.level} {name} has shape {array.shape}, expected {added} columns"
                )
        if self.level == 0 and z_coarse.shape[0] != 0:
            raise DimensionError("The level-0 block has no coarse rows")
        for array in (z_coarse, z_fine, eigenvalues):
            array.flags.writeable = False
        object.__setattr__(self, "z_coarse", z_coarse)
        object.__setattr__(self, "z_fine", z_fine)
        object.__setattr__(self, "eigenvalues", eigenvalues)

    @property
    def added(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def num_rows(self) -> int:
        return self.z_coarse.shape[0] + self.z_fine.shape[0]
