"""Typed run configuration built from the merged YAML/JSON settings."""

import dataclasses
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from sampler_errors import ConfigError

from .KernelSpec import KernelSpec
from .LevelHierarchy import LevelHierarchy

logger = logging.getLogger(__name__)

RUN_MODES = ("pCN", "DILI", "MLpCN", "MLDILI", "MLmixed")
MODEL_KINDS = ("elliptic", "linear_gaussian")


@dataclass
class HierarchySettings:
    num_levels: int = 4
    coarse_mesh_size: float = 0.05
    param_dim_base: int = 50
    param_dim_scale: int = 100


@dataclass
class PriorSettings:
    kernel: str = "exponential"
    correlation_rate: float = 5.0
    variance: float = 1.0
    mean: float = 0.0
    kl_max_nodes: int = 6561


@dataclass
class ModelSettings:
    kind: str = "elliptic"
    recycle_factorization: bool = True
    assembly_method: str = "tabulated"
    num_observations: int = 10
    operator_decay: float = 1.0
    operator_seed: int = 7


@dataclass
class DataSettings:
    data_file: str = "sampler_data/observations.json"
    truth_seed: int = 2017
    noise_seed: int = 2018
    snr: float = 50.0
    sensor_layout: str = "grid_9x8_drop_center"


@dataclass
class LaplaceSettings:
    max_iters: int = 50
    gradient_tol: Optional[float] = None
    cg_max_iters: int = 200
    eigenvalue_threshold: float = 1.0e-4
    num_gnh_samples: int = 20
    covariance_samples: int = 2000
    seed: int = 11


@dataclass
class LisSettings:
    truncation_threshold: float = 1.0e-2
    eigensolver_tol: float = 1.0e-8
    max_subspace_factor: int = 4
    build_single_level: bool = True
    measure_without_recycling: bool = False
    lis_file: str = "sampler_data/lis_basis.bin"
    seed: int = 13


@dataclass
class ProposalSettings:
    time_step: float = 1.0
    complement_time_step: float = 0.1
    pcn_coefficient: float = 0.95
    adapt: bool = True
    adapt_interval: int = 100
    adapt_prior_weight: int = 100
    covariance_floor: float = 1.0e-8
    coarse_marginal_correction: bool = True


@dataclass
class RunSettings:
    mode: str = "MLDILI"
    seed: int = 1
    epsilon: Optional[float] = None
    num_samples: List[int] = field(default_factory=lambda: [4000, 2000, 1000, 500])
    pilot_steps: int = 2000
    burn_in_fraction: float = 0.2
    state_thinning: int = 1
    pool_thinning: int = 1
    chains_per_level: int = 1
    workers: int = 4
    cross_level_ratio: float = 0.1
    min_samples: int = 100
    num_batches: int = 20
    param_iact_components: int = 5
    initial_state: str = "map"


@dataclass
class OutputSettings:
    output_dir: str = "sampler_runs"
    write_traces: bool = True


SECTIONS = {
    "hierarchy": HierarchySettings,
    "prior": PriorSettings,
    "model": ModelSettings,
    "data": DataSettings,
    "laplace": LaplaceSettings,
    "lis": LisSettings,
    "proposal": ProposalSettings,
    "run": RunSettings,
    "output": OutputSettings,
}


@dataclass
class RunConfig:
    """All settings of a run, validated as a whole before any computation."""

    hierarchy: HierarchySettings = field(default_factory=HierarchySettings)
    prior: PriorSettings = field(default_factory=PriorSettings)
    model: ModelSettings = field(default_factory=ModelSettings)
    data: DataSettings = field(default_factory=DataSettings)
    laplace: LaplaceSettings = field(default_factory=LaplaceSettings)
    lis: LisSettings = field(default_factory=LisSettings)
    proposal: ProposalSettings = field(default_factory=ProposalSettings)
    run: RunSettings = field(default_factory=RunSettings)
    output: OutputSettings = field(default_factory=OutputSettings)

    @classmethod
    def from_settings(cls, settings: Dict[str, Any]) -> "RunConfig":
        """Build and validate; every problem found is reported in one ConfigError."""
        problems: List[str] = []
        sections = {}
        for name, section_settings in (settings or {}).items():
            if name not in SECTIONS:
                problems.append(f"Unknown configuration section '{name}'")
                continue
            section_cls = SECTIONS[name]
            known = {f.name for f in dataclasses.fields(section_cls)}
            values = dict(section_settings or {})
            for key in sorted(set(values) - known):
                problems.append(f"Unknown setting '{name}.{key}'")
                values.pop(key)
            try:
                sections[name] = section_cls(**values)
            except TypeError as e:
                problems.append(f"Invalid '{name}' section: {e}")

        config = cls(**sections)
        problems.extend(config.collect_problems())
        if problems:
            raise ConfigError(problems)
        for warning in config.collect_warnings():
            logger.warning(warning)
        return config

    def collect_problems(self) -> List[str]:
        problems = []
        h, p, m, d = self.hierarchy, self.prior, self.model, self.data
        la, lis, prop, run = self.laplace, self.lis, self.proposal, self.run

        if not isinstance(h.num_levels, int) or not 1 <= h.num_levels <= 4:
            problems.append(f"hierarchy.num_levels must be between 1 and 4, got {h.num_levels}")
        if not _positive(h.coarse_mesh_size) or not _is_unit_fraction(h.coarse_mesh_size):
            problems.append(
                f"hierarchy.coarse_mesh_size must be 1/n for a positive integer n, got {h.coarse_mesh_size}"
            )
        if not _positive(h.param_dim_base + h.param_dim_scale) or h.param_dim_scale < 0:
            problems.append("hierarchy parameter dimension rule must give positive, non-decreasing R_l")
        if p.kernel != "exponential":
            problems.append(f"prior.kernel '{p.kernel}' is not supported")
        if not _positive(p.correlation_rate):
            problems.append("prior.correlation_rate must be positive")
        if not _positive(p.variance):
            problems.append("prior.variance must be positive")
        if m.kind not in MODEL_KINDS:
            problems.append(f"model.kind must be one of {MODEL_KINDS}, got '{m.kind}'")
        if m.assembly_method not in ("tabulated", "elementwise"):
            problems.append(f"model.assembly_method '{m.assembly_method}' is not supported")
        if not _positive(d.snr):
            problems.append(f"data.snr must be positive, got {d.snr}")
        if la.num_gnh_samples < 1:
            problems.append("laplace.num_gnh_samples must be at least 1")
        if la.covariance_samples < 2:
            problems.append("laplace.covariance_samples must be at least 2")
        if not _positive(la.eigenvalue_threshold):
            problems.append("laplace.eigenvalue_threshold must be positive")
        if not _positive(lis.truncation_threshold):
            problems.append("lis.truncation_threshold must be positive")
        if not _positive(lis.eigensolver_tol):
            problems.append("lis.eigensolver_tol must be positive")
        if not _positive(prop.time_step) or not _positive(prop.complement_time_step):
            problems.append("proposal jump sizes must be positive")
        if not -1.0 < prop.pcn_coefficient < 1.0:
            problems.append(f"proposal.pcn_coefficient must lie in (-1, 1), got {prop.pcn_coefficient}")
        if prop.adapt_interval < 1:
            problems.append("proposal.adapt_interval must be at least 1")
        if run.mode not in RUN_MODES:
            problems.append(f"run.mode must be one of {RUN_MODES}, got '{run.mode}'")
        if run.epsilon is not None and not _positive(run.epsilon):
            problems.append(f"run.epsilon must be positive, got {run.epsilon}")
        if run.epsilon is None:
            if not run.num_samples or any(int(n) < 1 for n in run.num_samples):
                problems.append("run.num_samples must list positive sample sizes when no epsilon is given")
            elif run.mode.startswith("ML") and len(run.num_samples) < h.num_levels:
                problems.append(
                    f"run.num_samples has {len(run.num_samples)} entries for {h.num_levels} levels"
                )
        if not 0.0 <= run.burn_in_fraction < 1.0:
            problems.append("run.burn_in_fraction must lie in [0, 1)")
        if not 0.0 <= run.cross_level_ratio < 1.0:
            problems.append("run.cross_level_ratio must lie in [0, 1)")
        for name in ("state_thinning", "pool_thinning", "chains_per_level", "workers", "num_batches", "pilot_steps"):
            if getattr(run, name) < 1:
                problems.append(f"run.{name} must be at least 1")
        if run.initial_state not in ("map", "prior_mean"):
            problems.append("run.initial_state must be 'map' or 'prior_mean'")
        return problems

    def collect_warnings(self) -> List[str]:
        warnings = []
        if self.lis.truncation_threshold >= 1.0:
            warnings.append(
                f"lis.truncation_threshold={self.lis.truncation_threshold} is not below one; "
                "the subspace will miss directions where data and prior are comparable"
            )
        return warnings

    def build_hierarchy(self) -> LevelHierarchy:
        h = self.hierarchy
        return LevelHierarchy.from_rule(
            h.num_levels, h.coarse_mesh_size, h.param_dim_base, h.param_dim_scale
        )

    def kernel_spec(self) -> KernelSpec:
        return KernelSpec(self.prior.kernel, self.prior.correlation_rate, self.prior.variance)

    @property
    def is_multilevel(self) -> bool:
        return self.run.mode.startswith("ML")

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


def _positive(value) -> bool:
    try:
        return float(value) > 0
    except (TypeError, ValueError):
        return False


def _is_unit_fraction(value) -> bool:
    try:
        cells = 1.0 / float(value)
    except (TypeError, ValueError, ZeroDivisionError):
        return False
    return abs(cells - round(cells)) < 1e-9
