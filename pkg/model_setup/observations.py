"""Sensor layout, synthetic data generation and the data file."""

import json
import logging
from pathlib import Path
from typing import Tuple

import numpy as np

from data_class.ObservationSetup import ObservationSetup
from data_class.WhitenedVector import WhitenedVector
from model_setup.forward_model import ForwardModel
from sampler_errors import ConfigError, UsageError

logger = logging.getLogger(__name__)

SENSOR_LAYOUTS = ("grid_9x8_drop_center",)


def default_sensor_layout() -> np.ndarray:
    """(i/10, j/9) for i=1..9, j=1..8 without the point closest to (0.5, 0.5); 71 sensors."""
    points = np.array([(i / 10.0, j / 9.0) for j in range(1, 9) for i in range(1, 10)])
    closest = np.argmin(np.linalg.norm(points - 0.5, axis=1))
    return np.delete(points, closest, axis=0)


def sensor_layout(name: str) -> np.ndarray:
    if name == "grid_9x8_drop_center":
        return default_sensor_layout()
    raise ConfigError(f"Unknown sensor layout '{name}', expected one of {SENSOR_LAYOUTS}")


def noise_sigma(clean: np.ndarray, snr: float) -> float:
    """sigma = max_i |F_i| / snr."""
    if not snr > 0:
        raise ConfigError(f"snr must be positive, got {snr}")
    return float(np.max(np.abs(clean)) / snr)


def add_observation_noise(clean: np.ndarray, sigma: float, noise_seed: int) -> np.ndarray:
    rng = np.random.default_rng(noise_seed)
    return clean + sigma * rng.standard_normal(clean.shape[0])


def generate_data(
    model: ForwardModel,
    truth_seed: int,
    noise_seed: int,
    snr: float,
) -> Tuple[ObservationSetup, WhitenedVector]:
    """Draw a prior truth on the model's level, solve, and add scaled Gaussian noise.

    Args:
        model: Forward model of the finest level.
        truth_seed: Seed for v_true ~ N(0, I).
        noise_seed: Seed for the observation noise.
        snr: Signal-to-noise ratio, sigma = max|F(v_true)| / snr.

    Returns:
        The observation setup and the truth.
    """
    truth = WhitenedVector(
        model.level, np.random.default_rng(truth_seed).standard_normal(model.param_dim)
    )
    clean = model.solve_observe(truth).observables
    sigma = noise_sigma(clean, snr)
    if sigma == 0:
        raise UsageError("The truth produces all-zero observables; sigma would be zero")
    data = add_observation_noise(clean, sigma, noise_seed)
    logger.info(
        f"Generated {data.shape[0]} observations on level {model.level} with sigma={sigma:.4e}"
    )
    observations = ObservationSetup(
        sensor_coords=getattr(model, "sensors", np.empty((0, 2))),
        sigma=sigma,
        data=data,
        level=model.level,
        truth_seed=truth_seed,
        noise_seed=noise_seed,
        snr=snr,
        snr_convention="max_abs",
    )
    return observations, truth


def write_data_file(
    observations: ObservationSetup,
    truth: WhitenedVector,
    data_path: str | Path,
    force: bool = False,
) -> Tuple[Path, Path]:
    """Write the JSON data file and the raw little-endian truth coefficients next to it."""
    data_path = Path(data_path)
    truth_path = data_path.with_suffix(".truth.f64")
    for path in (data_path, truth_path):
        if path.exists() and not force:
            raise UsageError(f"{path} already exists; pass --force to overwrite")
    data_path.parent.mkdir(parents=True, exist_ok=True)
    payload = observations.to_dict()
    payload["truth_file"] = truth_path.name
    with open(data_path, "w") as f:
        json.dump(payload, f, indent=2)
    truth_path.write_bytes(truth.coeffs.astype("<f8").tobytes())
    return data_path, truth_path


def read_data_file(data_path: str | Path) -> Tuple[ObservationSetup, WhitenedVector | None]:
    data_path = Path(data_path)
    if not data_path.exists():
        raise UsageError(f"Data file {data_path} not found; run generate-data first")
    with open(data_path, "r") as f:
        payload = json.load(f)
    observations = ObservationSetup.from_dict(payload)
    truth = None
    truth_name = payload.get("truth_file")
    if truth_name and (data_path.parent / truth_name).exists():
        coeffs = np.frombuffer((data_path.parent / truth_name).read_bytes(), dtype="<f8")
        truth = WhitenedVector(observations.level, coeffs)
    return observations, truth
