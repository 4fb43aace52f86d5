from dataclasses import dataclass, field
from typing import Any, Dict

import numpy as np

from sampler_errors import ConfigError, DimensionError


@dataclass(frozen=True, eq=False)
class ObservationSetup:
    """Sensor locations, noise level sigma (Gamma_obs = sigma^2 I) and data y.

    ``sensor_coords`` may be empty for models that do not observe a field.
    """

    sensor_coords: np.ndarray
    sigma: float
    data: np.ndarray
    level: int = 0
    truth_seed: int | None = None
    noise_seed: int | None = None
    snr: float | None = None
    snr_convention: str = "max_abs"
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        sensors = np.asarray(self.sensor_coords, dtype=float).reshape(-1, 2)
        data = np.asarray(self.data, dtype=float).ravel()
        if not self.sigma > 0:
            raise ConfigError(f"Observation noise sigma must be positive, got {self.sigma}")
        if sensors.shape[0] and np.any((sensors <= 0.0) | (sensors >= 1.0)):
            raise ConfigError("Sensors must lie strictly inside the unit square")
        if sensors.shape[0] and sensors.shape[0] != data.shape[0]:
            raise DimensionError(
                f"{sensors.shape[0]} sensors but {data.shape[0]} data values"
            )
        object.__setattr__(self, "sensor_coords", sensors)
        object.__setattr__(self, "data", data)

    @property
    def num_observations(self) -> int:
        return self.data.shape[0]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "level": self.level,
            "sensors": self.sensor_coords.tolist(),
            "sigma": float(self.sigma),
            "y": self.data.tolist(),
            "truth_seed": self.truth_seed,
            "noise_seed": self.noise_seed,
            "snr": self.snr,
            "snr_convention": self.snr_convention,
            **self.extra,
        }

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "ObservationSetup":
        known = {"level", "sensors", "sigma", "y", "truth_seed", "noise_seed", "snr", "snr_convention"}
        return cls(
            sensor_coords=np.asarray(payload.get("sensors", []), dtype=float),
            sigma=float(payload["sigma"]),
            data=np.asarray(payload["y"], dtype=float),
            level=int(payload.get("level", 0)),
            truth_seed=payload.get("truth_seed"),
            noise_seed=payload.get("noise_seed"),
            snr=payload.get("snr"),
            snr_convention=payload.get("snr_convention", "max_abs"),
            extra={k: v for k, v in payload.items() if k not in known},
        )
