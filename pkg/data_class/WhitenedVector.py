from dataclasses import dataclass

import numpy as np

from sampler_errors import DimensionError


@dataclass(frozen=True, eq=False)
class WhitenedVector:
    """Parameter coefficients in standard-Gaussian (whitened) coordinates.

    The coefficient array is copied on construction and made read-only.
    """

    level: int
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.ndim != 1:
            raise DimensionError(
                f"Whitened coefficients must be one-dimensional, got shape {coeffs.shape}"
            )
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def dim(self) -> int:
        return self.coeffs.shape[0]

    def __len__(self) -> int:
        return self.dim

    def same_as(self, other: "WhitenedVector") -> bool:
        """Bit-identical comparison including the level tag."""
        return self.level == other.level and np.array_equal(
            self.coeffs, other.coeffs
        )
