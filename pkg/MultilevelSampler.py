"""Runs the single-level and multilevel sampler modes and assembles the report."""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from datetime import datetime
from typing import Dict, List, Optional, Sequence

import numpy as np

from chain_diagnostics import batch_means, cross_level_ratio, iact, mean_iact, variance_decomposition
from coarse_pool import build_coarse_pool
from data_class.AutocorrResult import AutocorrResult
from data_class.ChainRecord import ChainRecord
from data_class.CoarsePool import CoarsePool
from data_class.CoupledChainRecord import CoupledChainRecord
from data_class.DiliOperatorSet import DiliOperatorSet
from data_class.LevelHierarchy import LevelHierarchy
from data_class.LevelStats import LevelStats
from data_class.LisBuildResult import LisBuildResult
from data_class.MultilevelReport import MultilevelReport
from data_class.RateEstimate import RateEstimate
from data_class.RunConfig import RunConfig
from data_class.RunStatus import RunStatus
from data_class.SampleAllocation import SampleAllocation
from data_class.SamplerIssue import SamplerIssue
from data_class.WhitenedVector import WhitenedVector
from dili_proposal import build_dili_operators
from LaplaceApproximation import laplace_sample
from MarkovChainSampler import MarkovChainSampler
from model_setup.forward_model import ForwardModel
from multilevel_estimator import (
    allocate_samples,
    combined_variance,
    estimate_rates,
    extrapolate_bias,
    telescope,
    variance_factor,
)
from ProposalKernel import (
    CoupledDiliKernel,
    CoupledPcnKernel,
    DiliKernel,
    PcnKernel,
    floor_covariance,
)
from sampler_errors import NumericalError, UsageError

DILI_MODES = ("DILI", "MLDILI", "MLmixed")


class MultilevelSampler:
    """Drives one run: kernels per level, chains bottom-up, pools, statistics and report.

    ``pCN`` and ``DILI`` run a single chain family on the finest level;
    ``MLpCN``, ``MLDILI`` and ``MLmixed`` run level 0 with the base algorithm
    and every level above with the coupled algorithm over the pool of the
    level below. Chain records and autocorrelation results of the last run are
    kept on the instance for the report generator.
    """

    def __init__(
        self,
        config: RunConfig,
        models: List[ForwardModel],
        lis_result: Optional[LisBuildResult] = None,
    ):
        self.logger = logging.getLogger(__name__)
        self.config = config
        self.models = models
        self.lis_result = lis_result
        self.hierarchy = config.build_hierarchy()
        self.mode = config.run.mode
        self.chain_sampler = MarkovChainSampler(
            burn_in_fraction=config.run.burn_in_fraction,
            state_thinning=config.run.state_thinning,
            param_iact_components=config.run.param_iact_components,
        )
        self._kernels: Dict[int, object] = {}
        self._issues: List[SamplerIssue] = []
        self.setup_seconds = 0.0
        self.records: Dict[int, List[ChainRecord | CoupledChainRecord]] = {}
        self.autocorrelations: Dict[int, AutocorrResult] = {}
        self.pilot_stats: List[LevelStats] = []

    @property
    def finest_level(self) -> int:
        return len(self.models) - 1

    @property
    def is_multilevel(self) -> bool:
        return self.mode.startswith("ML")

    def levels(self) -> List[int]:
        if self.is_multilevel:
            return list(range(len(self.models)))
        return [self.finest_level]

    def _check_inputs(self) -> None:
        if len(self.models) != self.hierarchy.num_levels:
            raise UsageError(
                f"{len(self.models)} models for a {self.hierarchy.num_levels}-level hierarchy"
            )
        needs_lis = self.mode in DILI_MODES
        if needs_lis and self.lis_result is None:
            raise UsageError(f"Mode {self.mode} needs a LIS; run build-lis first")
        if self.lis_result is not None and needs_lis:
            top = max(self.levels()) if self.mode != "MLmixed" else 0
            if self.lis_result.num_levels <= top:
                raise UsageError(
                    f"The LIS covers {self.lis_result.num_levels} levels, mode {self.mode} needs level {top}"
                )
        if self.lis_result is not None:
            self._check_lis_hierarchy(self.lis_result.basis.hierarchy)
        if self.config.run.initial_state == "map" and self.lis_result is None:
            self.logger.info("No Laplace references available; chains start at the prior mean")

    def _check_lis_hierarchy(self, built: LevelHierarchy) -> None:
        shared = min(built.num_levels, self.hierarchy.num_levels)
        for level in range(shared):
            if (
                built.param_dim[level] != self.hierarchy.param_dim[level]
                or built.fem_dof[level] != self.hierarchy.fem_dof[level]
            ):
                raise UsageError(
                    f"LIS was built for a different hierarchy (level {level}: R={built.param_dim[level]}, "
                    f"M={built.fem_dof[level]}; configured R={self.hierarchy.param_dim[level]}, "
                    f"M={self.hierarchy.fem_dof[level]}); rerun build-lis"
                )

    def _initial_state(self, level: int) -> WhitenedVector:
        model = self.models[level]
        references = self.lis_result.references if self.lis_result is not None else []
        if self.config.run.initial_state == "map" and level < len(references):
            return WhitenedVector(level, references[level].map_point.coeffs)
        return WhitenedVector(level, np.zeros(model.param_dim))

    def lis_covariance(self, level: int) -> np.ndarray:
        """Empirical covariance of Psi_l^T v over Laplace draws at ``level``, eigenvalues floored."""
        basis = self.lis_result.basis.truncated(level)
        if basis.rank == 0:
            return np.zeros((0, 0))
        laplace = self.config.laplace
        samples = laplace_sample(
            self.lis_result.references[level],
            laplace.covariance_samples,
            np.random.SeedSequence([laplace.seed, level]),
            max_workers=self.config.run.workers,
        )
        coords = basis.apply_transpose(np.column_stack([s.coeffs for s in samples])).T
        covariance = np.atleast_2d(np.cov(coords, rowvar=False))
        return floor_covariance(covariance, self.config.proposal.covariance_floor)

    def dili_operators(self, level: int) -> DiliOperatorSet:
        proposal = self.config.proposal
        return build_dili_operators(
            self.lis_covariance(level),
            self.lis_result.basis.truncated(level),
            proposal.time_step,
            proposal.complement_time_step,
        )

    def build_kernel(self, level: int):
        """The proposal kernel of ``level`` for the configured mode; built once per level."""
        if level in self._kernels:
            return self._kernels[level]
        proposal = self.config.proposal
        started = time.perf_counter()
        coupled = self.is_multilevel and level > 0
        use_dili = self.mode in ("DILI", "MLDILI") or (self.mode == "MLmixed" and level == 0)
        if use_dili:
            operators = self.dili_operators(level)
            if operators.rank == 0:
                self._add_issue(
                    "empty_lis",
                    f"Level {level}: the LIS is empty; DILI proposals reduce to pCN",
                    RunStatus.WARNING,
                    level,
                )
            options = {
                "adapt": proposal.adapt,
                "adapt_interval": proposal.adapt_interval,
                "adapt_prior_weight": proposal.adapt_prior_weight,
                "covariance_floor": proposal.covariance_floor,
            }
            if coupled:
                kernel = CoupledDiliKernel(
                    operators,
                    coarse_marginal_correction=proposal.coarse_marginal_correction,
                    **options,
                )
            else:
                kernel = DiliKernel(operators, **options)
        elif coupled:
            kernel = CoupledPcnKernel(proposal.pcn_coefficient)
        else:
            kernel = PcnKernel(proposal.pcn_coefficient)
        self.setup_seconds += time.perf_counter() - started
        self.logger.info(f"Level {level}: {kernel.name} kernel ready")
        self._kernels[level] = kernel
        return kernel

    def _run_chain(self, level, num_samples, pool, seed):
        kernel = self.build_kernel(level).clone()
        init = self._initial_state(level)
        if pool is None:
            return self.chain_sampler.run_base_chain(self.models[level], kernel, num_samples, init, seed)
        return self.chain_sampler.run_coupled_chain(
            self.models[level], self.models[level - 1], kernel, pool, num_samples, init, seed
        )

    def run_level(
        self,
        level: int,
        num_samples: int,
        pool: Optional[CoarsePool],
        seeds: np.random.SeedSequence,
        num_chains: int = 1,
    ) -> List[ChainRecord | CoupledChainRecord]:
        """Run ``num_chains`` independent chains sharing ``num_samples`` retained samples.

        Raises:
            NumericalError: A chain failed; the message names every failed chain.
        """
        per_chain = math.ceil(num_samples / num_chains)
        chain_seeds = seeds.spawn(num_chains)
        # kernels are built before the workers start so clones share one snapshot
        self.build_kernel(level)
        records: Dict[int, ChainRecord | CoupledChainRecord] = {}
        failures: List[str] = []
        max_workers = max(1, min(self.config.run.workers, num_chains))
        with ThreadPoolExecutor(max_workers=max_workers) as executor:
            chain_futures = {}
            for chain in range(num_chains):
                future = executor.submit(self._run_chain, level, per_chain, pool, chain_seeds[chain])
                chain_futures[future] = chain

            for future in as_completed(chain_futures):
                chain = chain_futures[future]
                try:
                    records[chain] = future.result()
                except Exception as e:
                    self.logger.error(f"Level {level} chain {chain} failed: {e}")
                    failures.append(f"chain {chain}: {e}")
        if failures:
            raise NumericalError(
                f"Level {level}: {len(failures)} of {num_chains} chains failed",
                {"failures": failures},
            )
        return [records[chain] for chain in range(num_chains)]

    def _add_issue(self, issue_type, description, severity, level=None, **info) -> None:
        self._issues.append(
            SamplerIssue(issue_type, description, severity, level, additional_info=info)
        )

    def _iact_or_one(self, series: np.ndarray, level: int, what: str) -> AutocorrResult:
        try:
            return iact(series)
        except UsageError as e:
            self._add_issue(
                "iact_unavailable", f"Level {level} {what}: {e}; tau taken as 1", RunStatus.WARNING, level
            )
            return AutocorrResult(1.0, 0, np.ones(1), len(series), degenerate=True)

    @staticmethod
    def summand(record: ChainRecord | CoupledChainRecord) -> np.ndarray:
        """Q_0 on a base chain, D_l on a coupled one."""
        if isinstance(record, CoupledChainRecord):
            return record.differences
        return np.asarray(record.qois, dtype=float)

    def summarise_level(self, level: int, records: Sequence[ChainRecord | CoupledChainRecord]) -> LevelStats:
        series = [self.summand(record) for record in records]
        pooled = np.concatenate(series)
        autocorr = [self._iact_or_one(s, level, "summand") for s in series]
        self.autocorrelations[level] = autocorr[0]
        param_taus = []
        for record in records:
            try:
                param_taus.append(mean_iact(record.param_trace))
            except UsageError:
                pass
        num_steps = sum(record.num_steps for record in records)
        cost_per_step = sum(r.seconds_per_step * r.num_steps for r in records) / num_steps
        accepted = sum(record.acceptance_count for record in records)
        failures = sum(record.solver_failures for record in records)
        if failures:
            self._add_issue(
                "solver_failures",
                f"Level {level}: {failures} proposals rejected after forward-solve failures",
                RunStatus.WARNING,
                level,
                solver_failures=failures,
            )

        fields = {}
        if isinstance(records[0], CoupledChainRecord) and pooled.shape[0] >= 2:
            fine = np.concatenate([r.fine_qois for r in records])
            coarse = np.concatenate([r.coarse_qois for r in records])
            decomposition = variance_decomposition(fine, coarse)
            fields = {
                "fine_qoi_mean": float(fine.mean()),
                "coarse_qoi_mean": float(coarse.mean()),
                "variance_fine": decomposition.variance_fine,
                "variance_coarse": decomposition.variance_coarse,
                "covariance": decomposition.covariance,
            }
            coupling = sum(r.coupling_violations() for r in records)
            if coupling:
                self._add_issue(
                    "coupling_violation",
                    f"Level {level}: {coupling} accepted steps break the coarse/fine coupling",
                    RunStatus.FAIL,
                    level,
                )

        stats = LevelStats(
            level=level,
            mean=float(pooled.mean()),
            variance=float(np.var(pooled, ddof=1)) if pooled.shape[0] > 1 else 0.0,
            iact=float(np.mean([a.tau for a in autocorr])),
            num_samples=int(pooled.shape[0]),
            cost_per_step=cost_per_step,
            kernel=records[0].kernel,
            num_chains=len(records),
            acceptance_rate=accepted / pooled.shape[0],
            param_iact=float(np.mean(param_taus)) if param_taus else float("nan"),
            num_steps=num_steps,
            extra={
                "solver_failures": failures,
                "iact_window": autocorr[0].window,
                "fem_dof": self.hierarchy.fem_dof[level],
            },
            **fields,
        )
        self.logger.info(
            f"Level {level}: Y = {stats.mean:.6g}, Var = {stats.variance:.3e}, "
            f"tau = {stats.iact:.2f}, N = {stats.num_samples}, C = {stats.cost_per_step * 1e3:.2f} ms"
        )
        return stats

    def _sweep(
        self,
        sample_sizes: Dict[int, int],
        seeds: np.random.SeedSequence,
        num_chains: int,
        keep_records: bool,
    ) -> tuple[List[LevelStats], Optional[Exception]]:
        """Run every level bottom-up; stops at the first failing level."""
        level_seeds = seeds.spawn(len(self.models))
        pool: Optional[CoarsePool] = None
        stats: List[LevelStats] = []
        for level in self.levels():
            try:
                records = self.run_level(
                    level, sample_sizes[level], pool, level_seeds[level], num_chains
                )
                stats.append(self.summarise_level(level, records))
                if keep_records:
                    self.records[level] = records
                if self.is_multilevel and level < self.finest_level:
                    pool = build_coarse_pool(records, self.config.run.pool_thinning)
            except Exception as e:
                self.logger.error(f"Level {level} failed, run aborted: {e}")
                self._add_issue("level_failure", f"Level {level}: {e}", RunStatus.FAIL, level)
                return stats, e
        return stats, None

    def pilot_allocation(self, epsilon: float, seeds: np.random.SeedSequence) -> SampleAllocation:
        """Estimate tau, Var and C from short chains and allocate samples for ``epsilon``."""
        run = self.config.run
        self.logger.info(f"Pilot run: {run.pilot_steps} steps per level")
        started = time.perf_counter()
        pilot, error = self._sweep(
            {level: run.pilot_steps for level in self.levels()}, seeds, 1, keep_records=False
        )
        self.setup_seconds += time.perf_counter() - started
        if error is not None:
            raise error
        self.pilot_stats = pilot
        # a zero pilot variance would allocate nothing beyond the floor
        variances = [max(stats.variance, np.finfo(float).tiny) for stats in pilot]
        return allocate_samples(
            [stats.iact for stats in pilot],
            variances,
            [stats.cost_per_step for stats in pilot],
            epsilon,
            cross_level_ratio=run.cross_level_ratio,
            min_samples=run.min_samples,
        )

    def _fixed_sample_sizes(self, num_samples: Optional[Sequence[int]]) -> Dict[int, int]:
        sizes = list(num_samples if num_samples is not None else self.config.run.num_samples)
        if not self.is_multilevel:
            return {self.finest_level: int(sizes[0])}
        if len(sizes) < len(self.models):
            raise UsageError(f"{len(sizes)} sample sizes for {len(self.models)} levels")
        return {level: int(sizes[level]) for level in self.levels()}

    def _cross_level(self, stats: List[LevelStats]):
        if len(stats) < 2:
            return None
        num_batches = self.config.run.num_batches
        try:
            batched = [
                batch_means(np.concatenate([self.summand(r) for r in self.records[s.level]]), num_batches)
                for s in stats
            ]
            return cross_level_ratio(batched)
        except UsageError as e:
            self.logger.info(f"Cross-level covariance not measured: {e}")
            return None

    def run(
        self,
        epsilon: Optional[float] = None,
        num_samples: Optional[Sequence[int]] = None,
    ) -> MultilevelReport:
        """Execute the configured mode.

        With ``epsilon`` the sample sizes come from a pilot run; otherwise from
        ``num_samples`` (or ``run.num_samples``). A failing level ends the run
        with a partial report whose status is FAIL.
        """
        self._check_inputs()
        run = self.config.run
        epsilon = epsilon if epsilon is not None else run.epsilon
        self._issues = []
        self.records = {}
        self.autocorrelations = {}
        self._warn_references()
        started = time.perf_counter()

        pilot_seeds, main_seeds = np.random.SeedSequence(run.seed).spawn(2)
        allocation = None
        if epsilon is not None:
            allocation = self.pilot_allocation(epsilon, pilot_seeds)
            sizes = dict(zip(self.levels(), allocation.num_samples))
        else:
            sizes = self._fixed_sample_sizes(num_samples)

        self.logger.info(f"Running {self.mode} on levels {self.levels()} with N = {list(sizes.values())}")
        stats, error = self._sweep(sizes, main_seeds, run.chains_per_level, keep_records=True)
        report = self._assemble(stats, error is None, epsilon, allocation)
        self.logger.info(
            f"{self.mode} finished in {time.perf_counter() - started:.1f}s: "
            f"estimate {report.estimate:.6g} +/- {report.standard_error:.2e} ({report.status.value})"
        )
        return report

    def _warn_references(self) -> None:
        if self.lis_result is None:
            return
        for reference in self.lis_result.references:
            if not reference.map_converged:
                self._add_issue(
                    "map_not_converged",
                    f"Level {reference.level}: the MAP search stopped at gradient norm {reference.gradient_norm:.3e}",
                    RunStatus.WARNING,
                    reference.level,
                )

    def _assemble(
        self,
        stats: List[LevelStats],
        complete: bool,
        epsilon: Optional[float],
        allocation: Optional[SampleAllocation],
    ) -> MultilevelReport:
        run = self.config.run
        if complete and self.is_multilevel:
            telescope(stats)
        estimator_variance = combined_variance(stats) if stats else float("nan")

        cross_level = self._cross_level(stats) if complete and self.is_multilevel else None
        ratio = cross_level.max_ratio if cross_level is not None else run.cross_level_ratio
        if cross_level is not None and not cross_level.bound_applies:
            self._add_issue(
                "cross_level_ratio",
                f"Measured cross-level ratio {ratio:.3f} >= 1; the variance bound does not apply",
                RunStatus.WARNING,
            )
            variance_bound = float("inf")
        else:
            variance_bound = variance_factor(max(ratio, 0.0)) * estimator_variance

        rates = RateEstimate(available=False)
        bias = None
        if complete and self.is_multilevel:
            fem_dof = self.hierarchy.fem_dof[: len(stats)]
            rates = estimate_rates(
                fem_dof,
                [s.bias_proxy for s in stats],
                [s.variance for s in stats],
                [s.cost_per_step for s in stats],
            )
            if rates.available and rates.theta_b > 0:
                bias = extrapolate_bias(stats[-1].mean, fem_dof, rates.theta_b)
                if epsilon is not None and bias**2 > epsilon**2 / 2:
                    self._add_issue(
                        "bias_budget",
                        f"Extrapolated bias {bias:.3e} exceeds the eps^2/2 budget for eps={epsilon:g}",
                        RunStatus.WARNING,
                    )

        report = MultilevelReport(
            mode=self.mode,
            levels=stats,
            estimate=float(sum(s.mean for s in stats)),
            estimator_variance=estimator_variance,
            variance_bound=variance_bound,
            cross_level_ratio=float(ratio),
            bias_estimate=bias,
            rates=rates,
            cross_level=cross_level,
            allocation=allocation,
            epsilon=epsilon,
            total_cost=float(sum(s.total_cost for s in stats)),
            setup_cost=self.setup_seconds,
            seed=run.seed,
            complete=complete,
            config=self.config.to_dict(),
            issues=list(self._issues),
            timestamp=datetime.now().isoformat(timespec="seconds"),
        )
        return report
