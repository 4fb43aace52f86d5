import logging
from typing import List

from data_class.FemLevel import FemLevel
from data_class.LevelHierarchy import LevelHierarchy
from data_class.ObservationSetup import ObservationSetup
from data_class.RunConfig import RunConfig
from model_setup.elliptic_fem import EllipticForwardModel
from model_setup.forward_model import ForwardModel
from model_setup.karhunen_loeve import build_kl_bases
from model_setup.linear_gaussian import build_linear_gaussian_models
from model_setup.observations import sensor_layout

logger = logging.getLogger(__name__)


class ForwardModelFactory:
    """Factory for the per-level forward models of a run."""

    @staticmethod
    def create_elliptic_models(
        config: RunConfig, hierarchy: LevelHierarchy
    ) -> List[ForwardModel]:
        """KL bases and bilinear FEM models on every level, sharing one sensor layout."""
        bases = build_kl_bases(
            hierarchy,
            config.kernel_spec(),
            max_nodes=config.prior.kl_max_nodes,
            mean=config.prior.mean,
        )
        sensors = sensor_layout(config.data.sensor_layout)
        models = []
        for level, basis in enumerate(bases):
            fem = FemLevel(level, hierarchy.cells_per_side(level))
            models.append(
                EllipticForwardModel(
                    fem,
                    basis,
                    sensors,
                    recycle_factorization=config.model.recycle_factorization,
                    assembly_method=config.model.assembly_method,
                )
            )
            logger.info(
                f"Level {level}: {fem.cells_per_side}x{fem.cells_per_side} cells, "
                f"{fem.num_nodes} nodes, {basis.param_dim} KL modes"
            )
        return models

    @staticmethod
    def create_linear_gaussian_models(
        config: RunConfig, hierarchy: LevelHierarchy
    ) -> List[ForwardModel]:
        return build_linear_gaussian_models(
            hierarchy,
            num_observations=config.model.num_observations,
            operator_decay=config.model.operator_decay,
            seed=config.model.operator_seed,
        )

    @staticmethod
    def create_models(
        config: RunConfig,
        hierarchy: LevelHierarchy,
        observations: ObservationSetup | None = None,
    ) -> List[ForwardModel]:
        """Create the models for ``config.model.kind`` and attach data if given."""
        if config.model.kind == "elliptic":
            models = ForwardModelFactory.create_elliptic_models(config, hierarchy)
        elif config.model.kind == "linear_gaussian":
            models = ForwardModelFactory.create_linear_gaussian_models(config, hierarchy)
        else:
            raise ValueError(f"Unsupported model kind: {config.model.kind}")

        if observations is not None:
            models = [model.with_observations(observations) for model in models]
        return models
