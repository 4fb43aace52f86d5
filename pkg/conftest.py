"""Shared fixtures: seeded generators, small hierarchies and toy forward models."""

from typing import List, Sequence

import numpy as np
import pytest

from data_class.ForwardSolution import ForwardSolution
from data_class.HierarchicalLisBasis import HierarchicalLisBasis
from data_class.LevelHierarchy import LevelHierarchy
from data_class.LisLevelBlock import LisLevelBlock
from data_class.ObservationSetup import ObservationSetup
from data_class.WhitenedVector import WhitenedVector
from dili_proposal import build_dili_operators
from model_setup.forward_model import ForwardModel
from model_setup.linear_gaussian import build_linear_gaussian_models


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long statistical checks and reproduction runs")


class ZeroMisfitModel(ForwardModel):
    """eta = 0 everywhere and Q(v) = v_0, so chains sample the prior."""

    def __init__(self, level: int, param_dim: int):
        super().__init__(
            level,
            param_dim,
            ObservationSetup(sensor_coords=np.empty((0, 2)), sigma=1.0, data=np.zeros(1)),
        )

    @property
    def num_observations(self) -> int:
        return 1

    def solve_observe(self, v: WhitenedVector) -> ForwardSolution:
        self.check_parameter(v)
        return ForwardSolution(parameter=v, observables=np.zeros(1), qoi=float(v.coeffs[0]))

    def jacobian_apply(self, solution, dv):
        return np.zeros(1)

    def jacobian_transpose_apply(self, solution, w):
        return np.zeros(self.param_dim)


def attach_linear_data(models, snr: float = 5.0, truth_seed: int = 21, noise_seed: int = 22):
    """Observe a prior truth through the finest linear model and give every level the data."""
    finest = models[-1]
    truth = np.random.default_rng(truth_seed).standard_normal(finest.param_dim)
    clean = finest.operator @ truth
    sigma = float(np.max(np.abs(clean)) / snr)
    data = clean + sigma * np.random.default_rng(noise_seed).standard_normal(clean.shape[0])
    observations = ObservationSetup(sensor_coords=np.empty((0, 2)), sigma=sigma, data=data)
    return [model.with_observations(observations) for model in models]


def make_random_basis(hierarchy: LevelHierarchy, added: Sequence[int], seed: int = 0) -> HierarchicalLisBasis:
    """Hierarchical basis whose blocks are random orthonormal directions orthogonal to the levels below."""
    rng = np.random.default_rng(seed)
    z0, _ = np.linalg.qr(rng.standard_normal((hierarchy.param_dim[0], added[0])))
    basis = HierarchicalLisBasis(
        hierarchy, (LisLevelBlock(0, np.zeros((0, added[0])), z0, np.linspace(2.0, 1.0, added[0])),), 0
    )
    for level in range(1, len(added)):
        lifted = basis.lifted()
        candidates = rng.standard_normal((hierarchy.param_dim[level], added[level]))
        candidates -= lifted.project(candidates)
        vectors, _ = np.linalg.qr(candidates)
        r_coarse = hierarchy.param_dim[level - 1]
        block = LisLevelBlock(
            level, vectors[:r_coarse], vectors[r_coarse:], np.linspace(1.0, 0.5, added[level])
        )
        basis = lifted.with_block(block)
    return basis


def random_spd(rank: int, seed: int = 0, low: float = 0.2, high: float = 3.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((rank, rank)))
    return (q * rng.uniform(low, high, rank)) @ q.T


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_hierarchy() -> LevelHierarchy:
    """R = (6, 8, 12), 2/4/8 cells per side."""
    return LevelHierarchy.from_rule(3, 0.5, 4, 2)


@pytest.fixture
def zero_misfit_models(small_hierarchy) -> List[ZeroMisfitModel]:
    return [ZeroMisfitModel(level, r) for level, r in enumerate(small_hierarchy.param_dim)]


@pytest.fixture
def linear_models(small_hierarchy):
    models = build_linear_gaussian_models(small_hierarchy, num_observations=4, operator_decay=0.5, seed=3)
    return attach_linear_data(models)


@pytest.fixture
def random_basis(small_hierarchy):
    def factory(added=(3, 1, 2), seed=0, num_levels=None):
        hierarchy = small_hierarchy.truncated(num_levels or len(added))
        return make_random_basis(hierarchy, added, seed)

    return factory


@pytest.fixture
def dili_operators(random_basis):
    """Operators on a random basis with a random (coupling) LIS covariance."""

    def factory(added=(3, 1, 2), level=None, seed=0, time_step=1.0, complement_time_step=0.1, sigma=None):
        basis = random_basis(added, seed)
        level = basis.top_level if level is None else level
        basis = basis.truncated(level)
        sigma_r = random_spd(basis.rank, seed + 100) if sigma is None else sigma
        return build_dili_operators(sigma_r, basis, time_step, complement_time_step)

    return factory


@pytest.fixture(scope="session")
def elliptic_models():
    """Two elliptic levels (4 and 8 cells per side) with 6 and 10 KL modes, no data."""
    from data_class.FemLevel import FemLevel
    from data_class.KernelSpec import KernelSpec
    from model_setup.elliptic_fem import EllipticForwardModel
    from model_setup.karhunen_loeve import build_kl_bases
    from model_setup.observations import default_sensor_layout

    hierarchy = LevelHierarchy.from_rule(2, 0.25, 2, 4)
    bases = build_kl_bases(hierarchy, KernelSpec("exponential", 5.0, 1.0))
    sensors = default_sensor_layout()
    return [
        EllipticForwardModel(FemLevel(level, hierarchy.cells_per_side(level)), basis, sensors)
        for level, basis in enumerate(bases)
    ]
