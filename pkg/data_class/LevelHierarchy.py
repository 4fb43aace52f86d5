from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from sampler_errors import DimensionError, UsageError

from .CoarseFineSplit import CoarseFineSplit
from .WhitenedVector import WhitenedVector


@dataclass(frozen=True)
class LevelHierarchy:
    """Mesh sizes, finite element sizes and parameter dimensions per level.

    Coarse/fine selectors are the contiguous index ranges [0, R_{l-1}) and
    [R_{l-1}, R_l); they are never stored as matrices.
    """

    mesh_size: Tuple[float, ...]
    fem_dof: Tuple[int, ...]
    param_dim: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "mesh_size", tuple(float(h) for h in self.mesh_size))
        object.__setattr__(self, "fem_dof", tuple(int(m) for m in self.fem_dof))
        object.__setattr__(self, "param_dim", tuple(int(r) for r in self.param_dim))

        if not self.param_dim:
            raise DimensionError("A hierarchy needs at least one level.")
        if not (len(self.mesh_size) == len(self.fem_dof) == len(self.param_dim)):
            raise DimensionError(
                "mesh_size, fem_dof and param_dim must have one entry per level: "
                f"{len(self.mesh_size)}, {len(self.fem_dof)}, {len(self.param_dim)}"
            )
        if any(r <= 0 for r in self.param_dim):
            raise DimensionError(f"Parameter dimensions must be positive: {self.param_dim}")
        if any(b < a for a, b in zip(self.param_dim, self.param_dim[1:])):
            raise DimensionError(f"Parameter dimensions must be non-decreasing: {self.param_dim}")
        if any(b < a for a, b in zip(self.fem_dof, self.fem_dof[1:])):
            raise DimensionError(f"FEM sizes must be non-decreasing: {self.fem_dof}")

    @classmethod
    def from_rule(
        cls,
        num_levels: int,
        coarse_mesh_size: float = 1.0 / 20.0,
        param_dim_base: int = 50,
        param_dim_scale: int = 100,
    ) -> "LevelHierarchy":
        """Build h_l = h_0 2^{-l}, M_l = (1/h_l + 1)^2 and R_l = base + scale 2^l."""
        if num_levels < 1:
            raise DimensionError("num_levels must be at least 1")
        mesh_size = [coarse_mesh_size * 2.0 ** (-level) for level in range(num_levels)]
        cells = [int(round(1.0 / h)) for h in mesh_size]
        fem_dof = [(n + 1) ** 2 for n in cells]
        param_dim = [
            param_dim_base + param_dim_scale * 2**level for level in range(num_levels)
        ]
        return cls(tuple(mesh_size), tuple(fem_dof), tuple(param_dim))

    @property
    def num_levels(self) -> int:
        return len(self.param_dim)

    @property
    def finest_level(self) -> int:
        return self.num_levels - 1

    def cells_per_side(self, level: int) -> int:
        return int(round(1.0 / self.mesh_size[level]))

    def fine_dim(self, level: int) -> int:
        """R_l - R_{l-1} (R_0 on level 0)."""
        if level == 0:
            return self.param_dim[0]
        return self.param_dim[level] - self.param_dim[level - 1]

    def truncated(self, num_levels: int) -> "LevelHierarchy":
        """The hierarchy made of the first ``num_levels`` levels."""
        if not 1 <= num_levels <= self.num_levels:
            raise DimensionError(
                f"Cannot keep {num_levels} of {self.num_levels} levels"
            )
        return LevelHierarchy(
            self.mesh_size[:num_levels],
            self.fem_dof[:num_levels],
            self.param_dim[:num_levels],
        )

    def whiten(self, level: int, coeffs: Sequence[float] | np.ndarray) -> WhitenedVector:
        """Wrap coefficients as a level-tagged vector, checking the length."""
        vector = WhitenedVector(level, coeffs)
        self.check(vector)
        return vector

    def check(self, v: WhitenedVector) -> None:
        if not 0 <= v.level < self.num_levels:
            raise DimensionError(f"Level {v.level} is outside the hierarchy")
        if v.dim != self.param_dim[v.level]:
            raise DimensionError(
                f"Level-{v.level} vector has length {v.dim}, expected {self.param_dim[v.level]}"
            )

    def split(self, v: WhitenedVector) -> CoarseFineSplit:
        if v.level == 0:
            raise UsageError("Level-0 vectors have no coarser level to split into")
        self.check(v)
        r_coarse = self.param_dim[v.level - 1]
        return CoarseFineSplit(
            coarse=v.coeffs[:r_coarse].copy(), fine=v.coeffs[r_coarse:].copy()
        )

    def embed(
        self,
        coarse: np.ndarray,
        fine: np.ndarray,
        level: int | None = None,
    ) -> WhitenedVector:
        """Inverse of split. The level is inferred from the block lengths if not given."""
        coarse = np.asarray(coarse, dtype=float)
        fine = np.asarray(fine, dtype=float)
        if level is None:
            level = self._level_for(coarse.shape[0], fine.shape[0])
        if level < 1 or level >= self.num_levels:
            raise DimensionError(f"Cannot embed into level {level}")
        if coarse.shape[0] != self.param_dim[level - 1] or fine.shape[0] != self.fine_dim(level):
            raise DimensionError(
                f"Blocks of length ({coarse.shape[0]}, {fine.shape[0]}) do not match "
                f"level {level} ({self.param_dim[level - 1]}, {self.fine_dim(level)})"
            )
        return WhitenedVector(level, np.concatenate([coarse, fine]))

    def restrict(self, v: WhitenedVector) -> WhitenedVector:
        if v.level == 0:
            raise UsageError("Level-0 vectors cannot be restricted")
        self.check(v)
        return WhitenedVector(v.level - 1, v.coeffs[: self.param_dim[v.level - 1]])

    def restrict_to(self, v: WhitenedVector, level: int) -> WhitenedVector:
        """Apply restrict repeatedly down to ``level``."""
        if level > v.level:
            raise UsageError(f"Cannot restrict level {v.level} up to level {level}")
        while v.level > level:
            v = self.restrict(v)
        return v

    def _level_for(self, coarse_len: int, fine_len: int) -> int:
        for level in range(1, self.num_levels):
            if (
                self.param_dim[level - 1] == coarse_len
                and self.param_dim[level] == coarse_len + fine_len
            ):
                return level
        raise DimensionError(
            f"No level has coarse/fine sizes ({coarse_len}, {fine_len}); "
            f"parameter dimensions are {self.param_dim}"
        )
