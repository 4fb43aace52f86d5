import logging
import math
import time
from typing import Tuple

import numpy as np

from coarse_pool import pool_draw
from data_class.ChainRecord import ChainRecord
from data_class.CoarsePool import CoarsePool
from data_class.CoupledChainRecord import CoupledChainRecord
from data_class.WhitenedVector import WhitenedVector
from dili_proposal import accept_base, accept_coupled
from model_setup.forward_model import ForwardModel
from sampler_errors import ConfigError, NumericalError, UsageError


class MarkovChainSampler:
    """Metropolis-Hastings drivers for the base-level chain and the coupled level-l chain.

    Both drivers run ``ceil(N / (1 - burn_in_fraction))`` steps, freeze kernel
    adaptation after burn-in and keep the last ``N`` steps.
    """

    def __init__(
        self,
        burn_in_fraction: float = 0.2,
        state_thinning: int = 1,
        param_iact_components: int = 5,
    ):
        if not 0.0 <= burn_in_fraction < 1.0:
            raise ConfigError(f"burn_in_fraction must lie in [0, 1), got {burn_in_fraction}")
        if state_thinning < 1:
            raise ConfigError(f"state_thinning must be at least 1, got {state_thinning}")
        self.logger = logging.getLogger(__name__)
        self.burn_in_fraction = burn_in_fraction
        self.state_thinning = state_thinning
        self.param_iact_components = param_iact_components

    def burn_in_steps(self, num_samples: int) -> int:
        return math.ceil(num_samples * self.burn_in_fraction / (1.0 - self.burn_in_fraction))

    def _evaluate(self, model: ForwardModel, coeffs: np.ndarray) -> Tuple[float, float] | None:
        try:
            return model.evaluate(WhitenedVector(model.level, coeffs))
        except NumericalError as error:
            self.logger.warning(f"Level {model.level}: forward solve failed, proposal rejected: {error}")
            return None

    def _start(self, model: ForwardModel, init: WhitenedVector) -> Tuple[np.ndarray, float, float]:
        model.check_parameter(init)
        evaluated = self._evaluate(model, init.coeffs)
        if evaluated is None or not math.isfinite(evaluated[0]):
            raise NumericalError(f"Level {model.level}: the initial state cannot be evaluated")
        return np.array(init.coeffs), evaluated[0], evaluated[1]

    def run_base_chain(
        self,
        model: ForwardModel,
        kernel,
        num_samples: int,
        init: WhitenedVector,
        seed: int | np.random.SeedSequence,
    ) -> ChainRecord:
        """Metropolis-Hastings with a prior-reversible kernel; the misfit is cached for the current state."""
        if num_samples < 1:
            raise UsageError("A chain needs at least one sample")
        rng = np.random.default_rng(seed)
        burn_in = self.burn_in_steps(num_samples)
        total = burn_in + num_samples
        current, eta, qoi = self._start(model, init)
        components = slice(0, min(self.param_iact_components, model.param_dim))

        states, misfits, qois, accepted_flags, trace = [], [], [], [], []
        failures = 0
        started = time.perf_counter()
        for step in range(total):
            if step == burn_in:
                kernel.freeze()
            proposal = kernel.propose(current, rng)
            evaluated = self._evaluate(model, proposal)
            if evaluated is None:
                failures += 1
                alpha = 0.0
            else:
                alpha = accept_base(eta, evaluated[0])
            accepted = rng.uniform() < alpha
            if accepted:
                current = proposal
                eta, qoi = evaluated
            kernel.record(current, accepted)

            if step >= burn_in:
                kept = step - burn_in
                if kept % self.state_thinning == 0:
                    states.append(current)
                misfits.append(eta)
                qois.append(qoi)
                accepted_flags.append(accepted)
                trace.append(current[components])
        elapsed = time.perf_counter() - started

        record = ChainRecord(
            level=model.level,
            kernel=kernel.name,
            states=np.array(states),
            misfits=np.array(misfits),
            qois=np.array(qois),
            accepted=np.array(accepted_flags, dtype=bool),
            param_trace=np.array(trace),
            num_steps=total,
            burn_in=burn_in,
            seconds_per_step=elapsed / total,
            solver_failures=failures,
            state_thinning=self.state_thinning,
        )
        self.logger.info(
            f"Level {model.level} {kernel.name} chain: {num_samples} samples, "
            f"acceptance rate {record.acceptance_rate:.3f}, {record.seconds_per_step * 1e3:.2f} ms/step"
        )
        return record

    def run_coupled_chain(
        self,
        fine_model: ForwardModel,
        coarse_model: ForwardModel,
        kernel,
        pool: CoarsePool,
        num_samples: int,
        init: WhitenedVector,
        seed: int | np.random.SeedSequence,
    ) -> CoupledChainRecord:
        """Level-l chain whose coarse block is proposed from the pooled level-(l-1) samples.

        The recorded coarse member advances to the pooled draw every step; the
        fine state only moves on acceptance, after which it restricts exactly
        to the recorded coarse member.
        """
        if num_samples < 1:
            raise UsageError("A chain needs at least one sample")
        if pool.size == 0:
            raise UsageError(f"The level-{pool.level} pool is empty")
        if pool.level != fine_model.level - 1 or coarse_model.level != pool.level:
            raise UsageError(
                f"A level-{fine_model.level} chain needs a level-{fine_model.level - 1} pool and model"
            )
        rng = np.random.default_rng(seed)
        burn_in = self.burn_in_steps(num_samples)
        total = burn_in + num_samples
        current, eta_fine, qoi_fine = self._start(fine_model, init)
        r_coarse = coarse_model.param_dim
        _, eta_coarse, _ = self._start(
            coarse_model, WhitenedVector(coarse_model.level, current[:r_coarse])
        )
        fine_width = fine_model.param_dim - r_coarse
        components = slice(r_coarse, r_coarse + min(self.param_iact_components, fine_width))

        columns = {name: [] for name in (
            "fine_states", "coarse_states", "fine_misfits", "coarse_misfits",
            "fine_qois", "coarse_qois", "pool_indices", "accepted", "param_trace",
        )}
        failures = 0
        started = time.perf_counter()
        for step in range(total):
            if step == burn_in:
                kernel.freeze()
            index, coarse_proposal = pool_draw(pool, rng)
            eta_coarse_proposal = float(pool.misfits[index])
            proposal = kernel.propose_coupled(current, coarse_proposal, rng)
            evaluated = self._evaluate(fine_model, proposal)
            if evaluated is None:
                failures += 1
                alpha = 0.0
            else:
                alpha = accept_coupled(
                    eta_fine,
                    eta_coarse,
                    evaluated[0],
                    eta_coarse_proposal,
                    kernel.log_correction(current, proposal),
                )
            accepted = rng.uniform() < alpha
            if accepted:
                current = proposal
                eta_fine, qoi_fine = evaluated
                eta_coarse = eta_coarse_proposal
            kernel.record(current, accepted)

            if step >= burn_in:
                if (step - burn_in) % self.state_thinning == 0:
                    columns["fine_states"].append(current)
                    columns["coarse_states"].append(coarse_proposal)
                columns["fine_misfits"].append(eta_fine)
                columns["coarse_misfits"].append(eta_coarse_proposal)
                columns["fine_qois"].append(qoi_fine)
                columns["coarse_qois"].append(float(pool.qois[index]))
                columns["pool_indices"].append(index)
                columns["accepted"].append(accepted)
                columns["param_trace"].append(current[components])
        elapsed = time.perf_counter() - started

        record = CoupledChainRecord(
            level=fine_model.level,
            kernel=kernel.name,
            fine_states=np.array(columns["fine_states"]),
            coarse_states=np.array(columns["coarse_states"]),
            fine_misfits=np.array(columns["fine_misfits"]),
            coarse_misfits=np.array(columns["coarse_misfits"]),
            fine_qois=np.array(columns["fine_qois"]),
            coarse_qois=np.array(columns["coarse_qois"]),
            pool_indices=np.array(columns["pool_indices"], dtype=int),
            accepted=np.array(columns["accepted"], dtype=bool),
            param_trace=np.array(columns["param_trace"]),
            num_steps=total,
            burn_in=burn_in,
            seconds_per_step=elapsed / total,
            solver_failures=failures,
            state_thinning=self.state_thinning,
        )
        self.logger.info(
            f"Level {fine_model.level} {kernel.name} chain: {num_samples} samples, "
            f"acceptance rate {record.acceptance_rate:.3f}, pool of {pool.size}"
        )
        return record
