import copy
import logging
import time
from typing import List, Optional

import numpy as np

from AveragedGnhOperator import AveragedGnhOperator
from LaplaceApproximation import LaplaceApproximation, laplace_sample
from data_class.HierarchicalLisBasis import HierarchicalLisBasis
from data_class.LaplaceReference import LaplaceReference
from data_class.LevelHierarchy import LevelHierarchy
from data_class.LisBuildResult import LisBuildResult
from data_class.RunConfig import LaplaceSettings, LisSettings
from data_class.WhitenedVector import WhitenedVector
from lis_construction import build_base_lis, enrich, lift_basis, single_level_lis
from model_setup.forward_model import ForwardModel


class LisBuilder:
    """Builds Laplace references and the hierarchical LIS level by level.

    Each level's MAP search starts from the previous level's MAP point padded
    with zeros. Random streams are spawned per level from the LIS seed so
    adding a level does not change the ones below it.
    """

    def __init__(
        self,
        models: List[ForwardModel],
        hierarchy: LevelHierarchy,
        laplace: LaplaceSettings | None = None,
        lis: LisSettings | None = None,
        workers: int = 1,
    ):
        self.logger = logging.getLogger(__name__)
        self.models = models
        self.hierarchy = hierarchy
        self.laplace = laplace or LaplaceSettings()
        self.lis = lis or LisSettings()
        self.workers = workers

    def _eigen_options(self, level: int, seeds) -> dict:
        return {
            "threshold": self.lis.truncation_threshold,
            "num_observations": self.models[level].num_observations,
            "tol": self.lis.eigensolver_tol,
            "max_subspace_factor": self.lis.max_subspace_factor,
            "seed": int(seeds.generate_state(1)[0]),
        }

    def build_reference(self, level: int, previous: Optional[LaplaceReference]) -> LaplaceReference:
        model = self.models[level]
        initial = None
        if previous is not None:
            start = np.zeros(model.param_dim)
            start[: previous.param_dim] = previous.map_point.coeffs
            initial = WhitenedVector(level, start)
        approximation = LaplaceApproximation(
            model,
            max_iters=self.laplace.max_iters,
            gradient_tol=self.laplace.gradient_tol,
            cg_max_iters=self.laplace.cg_max_iters,
            eigenvalue_threshold=self.laplace.eigenvalue_threshold,
            eigensolver_tol=self.lis.eigensolver_tol,
            seed=self.laplace.seed + level,
        )
        return approximation.build_reference(approximation.find_map(initial))

    def _operator(self, model: ForwardModel, reference: LaplaceReference, seeds) -> AveragedGnhOperator:
        samples = laplace_sample(
            reference, self.laplace.num_gnh_samples, seeds, max_workers=self.workers
        )
        return AveragedGnhOperator(model, samples, max_workers=self.workers)

    def build(self, num_levels: int | None = None) -> LisBuildResult:
        num_levels = len(self.models) if num_levels is None else num_levels
        level_seeds = np.random.SeedSequence(self.lis.seed).spawn(num_levels)
        references: List[LaplaceReference] = []
        single_ranks: List[Optional[int]] = []
        build_seconds: List[float] = []
        single_seconds: List[float] = []
        without_recycling: List[float] = []
        applies = {"hierarchical": [], "single": []}
        basis: HierarchicalLisBasis | None = None

        for level in range(num_levels):
            model = self.models[level]
            sample_seeds, eigen_seeds, single_seeds = level_seeds[level].spawn(3)
            reference = self.build_reference(level, references[-1] if references else None)
            references.append(reference)

            started = time.perf_counter()
            operator = self._operator(model, reference, sample_seeds)
            operator_seconds = time.perf_counter() - started
            basis = self._extend(basis, operator, level, eigen_seeds)
            build_seconds.append(time.perf_counter() - started)
            applies["hierarchical"].append(operator.num_applies)

            if self.lis.measure_without_recycling:
                without_recycling.append(
                    self._time_without_recycling(basis, reference, level, sample_seeds, eigen_seeds)
                )

            if self.lis.build_single_level:
                # same averaged operator, no deflation
                applies_before = operator.num_applies
                started = time.perf_counter()
                single = single_level_lis(
                    operator.apply, model.param_dim, **self._eigen_options(level, single_seeds)
                )
                single_seconds.append(operator_seconds + time.perf_counter() - started)
                single_ranks.append(single.rank)
                applies["single"].append(operator.num_applies - applies_before)
            else:
                single_ranks.append(None)

            self.logger.info(
                f"Level {level}: added {basis.added[-1]}, total {basis.rank}"
                + (f", single-level {single_ranks[-1]}" if single_ranks[-1] is not None else "")
                + f" ({build_seconds[-1]:.2f}s)"
            )
            if basis.rank == 0:
                self.logger.warning(
                    f"Level {level}: the LIS is empty; DILI proposals reduce to pCN"
                )

        return LisBuildResult(
            basis=basis,
            references=references,
            threshold=self.lis.truncation_threshold,
            num_gnh_samples=[self.laplace.num_gnh_samples] * num_levels,
            single_ranks=single_ranks,
            build_seconds=build_seconds,
            single_build_seconds=single_seconds,
            build_seconds_without_recycling=without_recycling,
            gnh_applies=applies,
        )

    def _extend(self, basis, operator, level, eigen_seeds) -> HierarchicalLisBasis:
        options = self._eigen_options(level, eigen_seeds)
        if basis is None:
            return build_base_lis(operator.apply, self.hierarchy.truncated(len(self.models)), **options)
        return enrich(lift_basis(basis), operator.apply, **options)

    def _time_without_recycling(self, basis, reference, level, sample_seeds, eigen_seeds) -> float:
        """Repeat this level's construction with every Jacobian action refactorising."""
        model = copy.copy(self.models[level])
        if not hasattr(model, "recycle_factorization"):
            return 0.0
        model.recycle_factorization = False
        started = time.perf_counter()
        operator = self._operator(model, reference, sample_seeds)
        previous = basis.truncated(level - 1) if level else None
        self._extend(previous, operator, level, eigen_seeds)
        return time.perf_counter() - started
