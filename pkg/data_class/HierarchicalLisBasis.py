from collections import Counter
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from sampler_errors import DimensionError, UsageError

from .LevelHierarchy import LevelHierarchy
from .LisLevelBlock import LisLevelBlock


@dataclass(frozen=True, eq=False)
class HierarchicalLisBasis:
    """Block upper-triangular orthonormal basis of the likelihood-informed subspace.

    The basis of level l is stored as one ``LisLevelBlock`` per level 0..l and
    is applied recursively:

        Psi_l = [[Psi_{l-1}, Z_c], [0, Z_f]]

    ``level`` is the parameter space the basis acts on. It is one more than the
    last block's level for a lifted basis, whose columns are the previous
    level's basis padded with zeros.
    """

    hierarchy: LevelHierarchy
    blocks: Tuple[LisLevelBlock, ...]
    level: int

    def __post_init__(self):
        blocks = tuple(self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if not blocks:
            raise DimensionError("A LIS basis needs the level-0 block")
        top = len(blocks) - 1
        if self.level not in (top, top + 1) or self.level >= self.hierarchy.num_levels:
            raise DimensionError(
                f"A basis with blocks up to level {top} cannot act on level {self.level}"
            )
        for index, block in enumerate(blocks):
            if block.level != index:
                raise DimensionError(f"Block {index} is tagged with level {block.level}")
            coarse_rows = self.hierarchy.param_dim[index - 1] if index > 0 else 0
            if (
                block.z_coarse.shape[0] != coarse_rows
                or block.z_fine.shape[0] != self.hierarchy.fine_dim(index)
            ):
                raise DimensionError(
                    f"Level-{index} block has shape ({block.z_coarse.shape[0]}, "
                    f"{block.z_fine.shape[0]}), expected ({coarse_rows}, "
                    f"{self.hierarchy.fine_dim(index)})"
                )

    @property
    def top_level(self) -> int:
        """Level of the last stored block."""
        return len(self.blocks) - 1

    @property
    def is_lifted(self) -> bool:
        return self.level > self.top_level

    @property
    def added(self) -> Tuple[int, ...]:
        """s_l per stored level."""
        return tuple(block.added for block in self.blocks)

    @property
    def ranks(self) -> Tuple[int, ...]:
        """r_l = r_{l-1} + s_l per stored level."""
        return tuple(int(r) for r in np.cumsum(self.added))

    @property
    def rank(self) -> int:
        return self.ranks[-1]

    @property
    def param_dim(self) -> int:
        return self.hierarchy.param_dim[self.level]

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([block.eigenvalues for block in self.blocks])

    def with_block(self, block: LisLevelBlock) -> "HierarchicalLisBasis":
        """Attach the enrichment block of a lifted basis."""
        if not self.is_lifted or block.level != self.level:
            raise UsageError(
                f"A level-{block.level} block can only extend a basis lifted to that level"
            )
        return replace(self, blocks=self.blocks + (block,))

    def lifted(self) -> "HierarchicalLisBasis":
        if self.is_lifted:
            raise UsageError("The basis is already lifted")
        return replace(self, level=self.level + 1)

    def truncated(self, level: int) -> "HierarchicalLisBasis":
        """The level-``level`` basis Psi_{level,r}."""
        if not 0 <= level <= self.top_level:
            raise DimensionError(f"No level-{level} block in a basis up to level {self.top_level}")
        return HierarchicalLisBasis(self.hierarchy, self.blocks[: level + 1], level)

    def _apply_to(self, top: int, w: np.ndarray, counter: Optional[Counter]) -> np.ndarray:
        block = self.blocks[top]
        r_prev = self.ranks[top] - block.added
        w_prev, w_new = w[:r_prev], w[r_prev:]
        fine = block.z_fine @ w_new
        if counter is not None:
            counter["flops"] += block.num_rows * block.added * w.shape[1]
        if top == 0:
            return fine
        coarse = self._apply_to(top - 1, w_prev, counter) + block.z_coarse @ w_new
        return np.vstack([coarse, fine])

    def _apply_transpose_to(self, top: int, x: np.ndarray, counter: Optional[Counter]) -> np.ndarray:
        block = self.blocks[top]
        if counter is not None:
            counter["flops"] += block.num_rows * block.added * x.shape[1]
        if top == 0:
            return block.z_fine.T @ x
        r_coarse = self.hierarchy.param_dim[top - 1]
        x_coarse, x_fine = x[:r_coarse], x[r_coarse:]
        new = block.z_coarse.T @ x_coarse + block.z_fine.T @ x_fine
        return np.vstack([self._apply_transpose_to(top - 1, x_coarse, counter), new])

    def apply(self, w: np.ndarray, counter: Optional[Counter] = None) -> np.ndarray:
        """Psi w for w of length r (or an r x k array).

        ``counter["flops"]`` accumulates the multiply-adds performed.
        """
        w = np.asarray(w, dtype=float)
        columns = w[:, np.newaxis] if w.ndim == 1 else w
        if columns.shape[0] != self.rank:
            raise DimensionError(f"Basis of rank {self.rank} applied to length {columns.shape[0]}")
        result = self._apply_to(self.top_level, columns, counter)
        if self.is_lifted:
            result = np.vstack([result, np.zeros((self.hierarchy.fine_dim(self.level), columns.shape[1]))])
        return result.reshape(-1) if w.ndim == 1 else result

    def apply_transpose(self, x: np.ndarray, counter: Optional[Counter] = None) -> np.ndarray:
        """Psi^T x for x of length R_level (or an R_level x k array)."""
        x = np.asarray(x, dtype=float)
        columns = x[:, np.newaxis] if x.ndim == 1 else x
        if columns.shape[0] != self.param_dim:
            raise DimensionError(
                f"Level-{self.level} basis applied to length {columns.shape[0]}, expected {self.param_dim}"
            )
        stored_rows = self.hierarchy.param_dim[self.top_level]
        result = self._apply_transpose_to(self.top_level, columns[:stored_rows], counter)
        return result.reshape(-1) if x.ndim == 1 else result

    def project(self, x: np.ndarray) -> np.ndarray:
        """Orthogonal projection Psi Psi^T x."""
        return self.apply(self.apply_transpose(x))

    def dense(self) -> np.ndarray:
        """Explicit R_level x r matrix."""
        return self.apply(np.eye(self.rank))

    def apply_cost(self) -> int:
        """sum_j R_j s_j multiply-adds for one application."""
        return int(
            sum(self.hierarchy.param_dim[j] * s for j, s in enumerate(self.added))
        )
