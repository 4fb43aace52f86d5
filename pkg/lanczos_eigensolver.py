import logging
from typing import Callable, Optional

import numpy as np
from scipy.linalg import eigh_tridiagonal

from data_class.EigenpairResult import EigenpairResult
from sampler_errors import EigensolverError

logger = logging.getLogger(__name__)


def fix_column_signs(vectors: np.ndarray) -> np.ndarray:
    """Make the first non-negligible entry of every column positive."""
    vectors = vectors.copy()
    for k in range(vectors.shape[1]):
        column = vectors[:, k]
        scale = np.max(np.abs(column))
        if scale == 0:
            continue
        first = np.flatnonzero(np.abs(column) > 1e-8 * scale)[0]
        if column[first] < 0:
            vectors[:, k] = -column
    return vectors


def _ritz_pairs(alphas, betas):
    if len(alphas) == 1:
        return np.array(alphas), np.ones((1, 1))
    theta, vectors = eigh_tridiagonal(np.array(alphas), np.array(betas))
    order = np.argsort(-theta, kind="stable")
    return theta[order], vectors[:, order]


def lanczos_eigsh(
    matvec: Callable[[np.ndarray], np.ndarray],
    dim: int,
    threshold: float,
    max_rank: Optional[int] = None,
    tol: float = 1e-8,
    max_subspace: Optional[int] = None,
    project: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    seed: int = 0,
    check_every: int = 5,
) -> EigenpairResult:
    """All eigenpairs above ``threshold`` of a symmetric operator given by its action.

    Lanczos with full reorthogonalisation and block size one. A Ritz pair is
    converged when its residual is at most ``tol * |theta|``. Iteration stops
    once the set of converged Ritz values above the threshold is stable between
    two checks and either the rank cap is met or a Ritz value has fallen below
    the threshold, or when the Krylov space becomes invariant.

    Args:
        matvec: Action of the operator.
        dim: Dimension of the operator.
        threshold: Keep eigenvalues strictly above this value.
        max_rank: Keep at most this many eigenpairs.
        tol: Relative Ritz residual tolerance.
        max_subspace: Largest Krylov dimension before giving up.
        project: Orthogonal projector applied to the start vector and every
            new Lanczos vector (for deflated operators).
        seed: Seed of the random start vector.
        check_every: Iterations between convergence checks.

    Returns:
        Eigenvalues (descending), unit eigenvectors with the first non-negligible
        entry positive, and their Ritz residuals.
    """
    max_rank = dim if max_rank is None else min(max_rank, dim)
    max_subspace = dim if max_subspace is None else min(max_subspace, dim)
    empty = EigenpairResult(np.zeros(0), np.zeros((dim, 0)), np.zeros(0), 0)
    if dim == 0 or max_rank == 0:
        return empty

    start = np.random.default_rng(seed).standard_normal(dim)
    if project is not None:
        start = project(start)
    start_norm = np.linalg.norm(start)
    if start_norm == 0:
        return empty

    basis = np.zeros((dim, max_subspace))
    basis[:, 0] = start / start_norm
    alphas, betas = [], []
    norm_estimate = 0.0
    previous_count = -1
    converged = False
    theta = residuals = ritz = None
    selected = np.zeros(0, dtype=int)

    for j in range(max_subspace):
        q = basis[:, j]
        w = matvec(q)
        if project is not None:
            w = project(w)
        alpha = float(q @ w)
        w = w - alpha * q
        if j > 0:
            w -= betas[-1] * basis[:, j - 1]
        for _ in range(2):
            w -= basis[:, : j + 1] @ (basis[:, : j + 1].T @ w)
        if project is not None:
            w = project(w)
        beta = float(np.linalg.norm(w))
        alphas.append(alpha)
        norm_estimate = max(norm_estimate, abs(alpha) + beta + (betas[-1] if betas else 0.0))

        invariant = beta <= 1e-12 * max(norm_estimate, np.finfo(float).tiny)
        exhausted = j + 1 == max_subspace
        if invariant or exhausted or (j + 1) % check_every == 0:
            theta, ritz = _ritz_pairs(alphas, betas)
            residuals = np.abs(beta * ritz[-1, :])
            selected = np.flatnonzero(theta > threshold)[:max_rank]
            converged = bool(
                np.all(residuals[selected] <= tol * np.abs(theta[selected]))
            )
            count = selected.shape[0]
            if invariant:
                converged = True
                break
            if converged and count == previous_count and (
                count == max_rank or np.any(theta <= threshold)
            ):
                break
            previous_count = count if converged else -1
            if exhausted:
                break

        basis[:, j + 1] = w / beta
        betas.append(beta)

    if not converged:
        raise EigensolverError(
            f"Lanczos did not converge within a {len(alphas)}-dimensional Krylov space",
            residuals[selected] if residuals is not None else (),
        )

    eigenvectors = basis[:, : len(alphas)] @ ritz[:, selected]
    if project is not None:
        eigenvectors = project(eigenvectors)
    eigenvectors /= np.linalg.norm(eigenvectors, axis=0, keepdims=True)
    truncated = bool(np.sum(theta > threshold) > max_rank)
    if truncated:
        logger.warning(
            f"Eigensolver kept {max_rank} eigenpairs; more eigenvalues exceed {threshold:g}"
        )
    return EigenpairResult(
        eigenvalues=theta[selected].copy(),
        eigenvectors=fix_column_signs(eigenvectors),
        residuals=residuals[selected].copy(),
        iterations=len(alphas),
        truncated_by_rank=truncated,
    )
