import numpy as np
from scipy.spatial.distance import cdist

from data_class.KernelSpec import KernelSpec


def kernel_gram(points: np.ndarray, spec: KernelSpec) -> np.ndarray:
    """Return the Gram matrix variance * exp(-rate * |x_i - x_j|)."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    distances = cdist(points, points, metric="euclidean")
    gram = spec.variance * np.exp(-spec.correlation_rate * distances)
    # cdist is symmetric up to rounding; keep the result exactly symmetric
    return 0.5 * (gram + gram.T)
