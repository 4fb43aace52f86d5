from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from .WhitenedVector import WhitenedVector


@dataclass(frozen=True, eq=False)
class ForwardSolution:
    """State, observables and QoI of one forward solve.

    ``factorization`` is the sparse factor of the reduced stiffness matrix; it
    is reused by linearised and adjoint solves and is None when recycling is
    disabled. ``coefficient`` holds e^u at the element Gauss points.
    """

    parameter: WhitenedVector
    observables: np.ndarray
    qoi: float
    state: Optional[np.ndarray] = None
    coefficient: Optional[np.ndarray] = None
    factorization: Optional[Any] = None
