"""Gauss-Newton MAP search and low-rank Laplace approximation on one level."""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List

import numpy as np
from scipy.sparse.linalg import LinearOperator, cg

from data_class.LaplaceReference import LaplaceReference
from data_class.MapResult import MapResult
from data_class.WhitenedVector import WhitenedVector
from lanczos_eigensolver import lanczos_eigsh
from model_setup.forward_model import ForwardModel

ARMIJO_CONSTANT = 1e-4
MAX_BACKTRACKS = 30


class LaplaceApproximation:
    """Builds the Laplace reference distribution of one level's posterior."""

    def __init__(
        self,
        model: ForwardModel,
        max_iters: int = 50,
        gradient_tol: float | None = None,
        cg_max_iters: int = 200,
        eigenvalue_threshold: float = 1e-4,
        eigensolver_tol: float = 1e-8,
        seed: int = 0,
    ):
        self.model = model
        self.max_iters = max_iters
        self.gradient_tol = (
            gradient_tol if gradient_tol is not None else 1e-6 * np.sqrt(model.param_dim)
        )
        self.cg_max_iters = cg_max_iters
        self.eigenvalue_threshold = eigenvalue_threshold
        self.eigensolver_tol = eigensolver_tol
        self.seed = seed
        self.logger = logging.getLogger(__name__)

    def _objective(self, v: WhitenedVector):
        solution = self.model.solve_observe(v)
        return self.model.misfit_from(solution) + 0.5 * v.coeffs @ v.coeffs, solution

    def find_map(self, initial: WhitenedVector | None = None) -> MapResult:
        """Inexact Gauss-Newton minimisation of eta(v) + |v|^2 / 2.

        Inner systems (I + H) p = -g are solved with conjugate gradients, to a
        relative tolerance min(0.5, sqrt(|g| / |g_0|)); steps are accepted by
        Armijo backtracking, so the objective decreases monotonically.

        Returns:
            The last accepted iterate; ``converged`` is False when the gradient
            tolerance was not reached in ``max_iters`` iterations.
        """
        model = self.model
        v = initial if initial is not None else WhitenedVector(model.level, np.zeros(model.param_dim))
        objective, solution = self._objective(v)
        history = [float(objective)]
        gradient = model.misfit_gradient(solution) + v.coeffs
        initial_norm = max(np.linalg.norm(gradient), np.finfo(float).tiny)

        for iteration in range(self.max_iters + 1):
            gradient_norm = float(np.linalg.norm(gradient))
            if gradient_norm <= self.gradient_tol:
                self.logger.info(
                    f"Level {model.level}: MAP found after {iteration} Gauss-Newton steps "
                    f"(|g|={gradient_norm:.2e})"
                )
                return MapResult(v, True, iteration, gradient_norm, history)
            if iteration == self.max_iters:
                break

            current = solution
            hessian = LinearOperator(
                (model.param_dim, model.param_dim),
                matvec=lambda x: model.gnh_apply(current, np.ravel(x)) + np.ravel(x),
                dtype=float,
            )
            forcing = min(0.5, np.sqrt(gradient_norm / initial_norm))
            step, _ = cg(hessian, -gradient, rtol=forcing, maxiter=self.cg_max_iters)

            slope = float(gradient @ step)
            if slope >= 0:
                step, slope = -gradient, -gradient_norm**2

            length = 1.0
            for _ in range(MAX_BACKTRACKS):
                trial = WhitenedVector(model.level, v.coeffs + length * step)
                trial_objective, trial_solution = self._objective(trial)
                if trial_objective <= objective + ARMIJO_CONSTANT * length * slope:
                    break
                length *= 0.5
            else:
                self.logger.warning(
                    f"Level {model.level}: line search stalled at |g|={gradient_norm:.2e}"
                )
                return MapResult(v, False, iteration, gradient_norm, history)

            v, objective, solution = trial, trial_objective, trial_solution
            history.append(float(objective))
            gradient = model.misfit_gradient(solution) + v.coeffs

        self.logger.warning(
            f"Level {model.level}: MAP search stopped after {self.max_iters} iterations "
            f"with |g|={gradient_norm:.2e} > {self.gradient_tol:.2e}"
        )
        return MapResult(v, False, self.max_iters, gradient_norm, history)

    def build_reference(self, map_result: MapResult | None = None) -> LaplaceReference:
        """Truncated GNH eigenpairs at the MAP point."""
        if map_result is None:
            map_result = self.find_map()
        model = self.model
        solution = model.solve_observe(map_result.point)
        pairs = lanczos_eigsh(
            lambda x: model.gnh_apply(solution, x),
            model.param_dim,
            threshold=self.eigenvalue_threshold,
            max_rank=min(model.param_dim, 2 * model.num_observations),
            tol=self.eigensolver_tol,
            seed=self.seed,
        )
        return LaplaceReference(
            level=model.level,
            map_point=map_result.point,
            eigenvalues=pairs.eigenvalues,
            eigenvectors=pairs.eigenvectors,
            map_converged=map_result.converged,
            gradient_norm=map_result.gradient_norm,
        )


def laplace_sample(
    ref: LaplaceReference, n: int, seed: int | np.random.SeedSequence, max_workers: int = 1
) -> List[WhitenedVector]:
    """v = v_MAP + (I - Psi diag(1 - (1 + lambda)^{-1/2}) Psi^T) xi, xi ~ N(0, I).

    Each sample draws from its own substream of ``seed``, so the set does not
    depend on ``max_workers``.
    """
    streams = np.random.SeedSequence(seed) if not isinstance(seed, np.random.SeedSequence) else seed
    # spawn from a copy; the caller's sequence keeps its child counter
    children = np.random.SeedSequence(
        streams.entropy, spawn_key=streams.spawn_key, pool_size=streams.pool_size
    ).spawn(n)
    shrink = 1.0 - 1.0 / np.sqrt(1.0 + ref.eigenvalues)
    psi = ref.eigenvectors

    def draw(child):
        xi = np.random.default_rng(child).standard_normal(ref.param_dim)
        return WhitenedVector(
            ref.level, ref.map_point.coeffs + xi - psi @ (shrink * (psi.T @ xi))
        )

    if max_workers <= 1:
        return [draw(child) for child in children]
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        return list(executor.map(draw, children))
