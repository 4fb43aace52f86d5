"""Truncated Karhunen-Loeve expansion of the Gaussian prior.

The covariance operator is discretised once on a reference grid with
trapezoidal quadrature weights. Level bases are the leading modes of that
single eigenproblem, transferred to each level grid, so the first R_{l-1}
modes of level l are exactly the modes of level l-1.
"""

import logging
from pathlib import Path
from typing import List, Sequence

import numpy as np
import scipy.linalg
from scipy.interpolate import RegularGridInterpolator

from data_class.KernelSpec import KernelSpec
from data_class.KlBasis import KlBasis
from data_class.LevelHierarchy import LevelHierarchy
from data_class.WhitenedVector import WhitenedVector
from lanczos_eigensolver import fix_column_signs
from model_setup.kernel import kernel_gram
from sampler_errors import DimensionError, EigensolverError

logger = logging.getLogger(__name__)

# relative gap below which two eigenvalues are treated as tied
TIE_TOLERANCE = 1e-10


def grid_nodes(cells_per_side: int) -> np.ndarray:
    ticks = np.linspace(0.0, 1.0, cells_per_side + 1)
    xx, yy = np.meshgrid(ticks, ticks, indexing="xy")
    return np.column_stack([xx.ravel(), yy.ravel()])


def trapezoid_weights(cells_per_side: int) -> np.ndarray:
    """Tensor trapezoidal weights on the uniform grid (sum to 1)."""
    h = 1.0 / cells_per_side
    w1 = np.full(cells_per_side + 1, h)
    w1[[0, -1]] = 0.5 * h
    return np.outer(w1, w1).ravel()


def _order_ties(eigenvalues: np.ndarray, vectors: np.ndarray):
    """Sort descending; tied eigenvalues are ordered by their first differing component."""
    order = np.argsort(-eigenvalues, kind="stable")
    eigenvalues, vectors = eigenvalues[order], vectors[:, order]
    degenerate_pairs = 0
    start = 0
    while start < eigenvalues.shape[0]:
        stop = start + 1
        scale = max(abs(eigenvalues[start]), np.finfo(float).tiny)
        while (
            stop < eigenvalues.shape[0]
            and abs(eigenvalues[start] - eigenvalues[stop]) <= TIE_TOLERANCE * scale
        ):
            stop += 1
        if stop - start > 1:
            degenerate_pairs += stop - start - 1
            group = list(range(start, stop))
            rounded = np.round(vectors[:, group], 12)
            keys = sorted(range(len(group)), key=lambda g: tuple(-rounded[:, g]))
            vectors[:, group] = vectors[:, [group[g] for g in keys]]
        start = stop
    return eigenvalues, vectors, degenerate_pairs


def kl_decompose(
    cells_per_side: int,
    spec: KernelSpec,
    num_modes: int,
    level: int = 0,
    mean: float = 0.0,
) -> KlBasis:
    """Leading eigenpairs of the quadrature-weighted covariance operator on one grid.

    Solves W^{1/2} K W^{1/2} y = omega y densely and returns phi = W^{-1/2} y,
    which is orthonormal in the inner product <f, g> = f^T W g.

    Args:
        cells_per_side: Number of cells per side of the uniform grid.
        spec: Covariance kernel.
        num_modes: Number of modes R to keep.
        level: Level tag stored on the basis.
        mean: Constant prior mean m_0.

    Returns:
        The KL basis with descending eigenvalues and sign-normalised modes.
    """
    nodes = grid_nodes(cells_per_side)
    if num_modes > nodes.shape[0]:
        raise DimensionError(
            f"Cannot extract {num_modes} modes from a grid with {nodes.shape[0]} nodes"
        )
    weights = trapezoid_weights(cells_per_side)
    sqrt_w = np.sqrt(weights)
    operator = sqrt_w[:, None] * kernel_gram(nodes, spec) * sqrt_w[None, :]

    num_nodes = nodes.shape[0]
    try:
        eigenvalues, vectors = scipy.linalg.eigh(
            operator, subset_by_index=[num_nodes - num_modes, num_nodes - 1]
        )
    except np.linalg.LinAlgError as e:
        raise EigensolverError(f"KL eigensolve failed on a {num_nodes}-node grid: {e}")

    residuals = np.linalg.norm(operator @ vectors - vectors * eigenvalues, axis=0)
    scale = max(abs(eigenvalues).max(), np.finfo(float).tiny)
    if np.any(residuals > 1e-8 * scale):
        raise EigensolverError(
            "KL eigenpairs did not reach the requested accuracy", residuals
        )

    eigenvalues = np.clip(eigenvalues, 0.0, None)
    eigenvalues, vectors, degenerate_pairs = _order_ties(eigenvalues, fix_column_signs(vectors))
    if degenerate_pairs:
        logger.warning(
            f"KL decomposition on {num_nodes} nodes has {degenerate_pairs} tied eigenvalue pair(s)"
        )

    return KlBasis(
        level=level,
        cells_per_side=cells_per_side,
        eigenvalues=eigenvalues,
        eigenfunctions=vectors / sqrt_w[:, None],
        mean=np.full(num_nodes, float(mean)),
        degenerate_pairs=degenerate_pairs,
    )


def transfer_basis(reference: KlBasis, cells_per_side: int, num_modes: int, level: int) -> KlBasis:
    """Evaluate the first ``num_modes`` reference modes on another uniform grid.

    Grids whose nodes are a subset of the reference nodes are sampled exactly;
    otherwise the modes are interpolated bilinearly.
    """
    n_ref = reference.cells_per_side
    if n_ref % cells_per_side == 0:
        stride = n_ref // cells_per_side
        index = np.arange(0, n_ref + 1, stride)
        jj, ii = np.meshgrid(index, index, indexing="ij")
        nodes = (ii + (n_ref + 1) * jj).ravel()
        modes = reference.eigenfunctions[nodes, :num_modes]
        mean = reference.mean[nodes]
    else:
        ticks = np.linspace(0.0, 1.0, n_ref + 1)
        target = grid_nodes(cells_per_side)
        # reference arrays are stored y-major: value[j, i] at (x_i, y_j)
        stacked = np.concatenate(
            [reference.eigenfunctions[:, :num_modes], reference.mean[:, None]], axis=1
        ).reshape(n_ref + 1, n_ref + 1, num_modes + 1)
        interpolator = RegularGridInterpolator((ticks, ticks), stacked, method="linear")
        values = interpolator(target[:, ::-1])
        modes, mean = values[:, :num_modes], values[:, num_modes]

    return KlBasis(
        level=level,
        cells_per_side=cells_per_side,
        eigenvalues=reference.eigenvalues[:num_modes],
        eigenfunctions=modes,
        mean=mean,
        degenerate_pairs=reference.degenerate_pairs,
    )


def reference_cells(hierarchy: LevelHierarchy, max_nodes: int) -> int:
    """Finest level grid, halved until it has at most ``max_nodes`` nodes."""
    cells = hierarchy.cells_per_side(hierarchy.finest_level)
    while (cells + 1) ** 2 > max_nodes and cells % 2 == 0:
        cells //= 2
    if (cells + 1) ** 2 < hierarchy.param_dim[-1]:
        raise DimensionError(
            f"KL reference grid with {cells} cells per side cannot hold "
            f"{hierarchy.param_dim[-1]} modes; raise prior.kl_max_nodes"
        )
    return cells


def build_kl_bases(
    hierarchy: LevelHierarchy,
    spec: KernelSpec,
    max_nodes: int = 6561,
    mean: float = 0.0,
) -> List[KlBasis]:
    """One nested KL basis per level, all taken from a single reference eigenproblem."""
    cells = reference_cells(hierarchy, max_nodes)
    logger.info(
        f"Solving the KL eigenproblem on a {cells}x{cells} reference grid "
        f"for {hierarchy.param_dim[-1]} modes"
    )
    reference = kl_decompose(cells, spec, hierarchy.param_dim[-1], level=hierarchy.finest_level, mean=mean)
    return [
        transfer_basis(reference, hierarchy.cells_per_side(level), hierarchy.param_dim[level], level)
        for level in range(hierarchy.num_levels)
    ]


def synthesize_field(v: WhitenedVector, basis: KlBasis) -> np.ndarray:
    """u = m_0 + sum_j sqrt(omega_j) phi_j v_j at the grid nodes."""
    if v.level != basis.level:
        raise DimensionError(f"Vector level {v.level} does not match basis level {basis.level}")
    if v.dim != basis.param_dim:
        raise DimensionError(f"Vector has {v.dim} coefficients, basis has {basis.param_dim} modes")
    return basis.mean + basis.scaled_modes @ v.coeffs


def prior_logpdf(v: WhitenedVector) -> float:
    return float(-0.5 * v.coeffs @ v.coeffs - 0.5 * v.dim * np.log(2.0 * np.pi))


def export_kl_basis(basis: KlBasis, path: str | Path) -> Path:
    """Write header (level, R, nodes) as int64 then eigenvalues, modes (row-major, one mode per row) and mean."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = np.array([basis.level, basis.param_dim, basis.num_nodes], dtype="<i8")
    with open(path, "wb") as f:
        f.write(header.tobytes())
        f.write(basis.eigenvalues.astype("<f8").tobytes())
        f.write(np.ascontiguousarray(basis.eigenfunctions.T).astype("<f8").tobytes())
        f.write(basis.mean.astype("<f8").tobytes())
    return path


def import_kl_basis(path: str | Path) -> KlBasis:
    raw = Path(path).read_bytes()
    level, num_modes, num_nodes = np.frombuffer(raw[:24], dtype="<i8")
    payload = np.frombuffer(raw[24:], dtype="<f8")
    expected = num_modes + num_modes * num_nodes + num_nodes
    if payload.shape[0] != expected:
        raise DimensionError(
            f"KL file {path} holds {payload.shape[0]} values, expected {expected}"
        )
    eigenvalues = payload[:num_modes]
    modes = payload[num_modes : num_modes + num_modes * num_nodes].reshape(num_modes, num_nodes).T
    mean = payload[num_modes + num_modes * num_nodes :]
    return KlBasis(
        level=int(level),
        cells_per_side=int(round(np.sqrt(num_nodes))) - 1,
        eigenvalues=eigenvalues.copy(),
        eigenfunctions=modes.copy(),
        mean=mean.copy(),
    )
