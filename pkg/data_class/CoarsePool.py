from dataclasses import dataclass

import numpy as np

from sampler_errors import UsageError


@dataclass(frozen=True, eq=False)
class CoarsePool:
    """Sealed set of level-l posterior samples used as an independence proposal on level l+1."""

    level: int
    samples: np.ndarray
    misfits: np.ndarray
    qois: np.ndarray

    def __post_init__(self):
        misfits = np.array(self.misfits, dtype=float).reshape(-1)
        qois = np.array(self.qois, dtype=float).reshape(-1)
        samples = np.array(self.samples, dtype=float)
        if samples.ndim != 2:
            samples = samples.reshape(misfits.shape[0], -1) if samples.size else np.zeros((0, 0))
        if not (samples.shape[0] == misfits.shape[0] == qois.shape[0]):
            raise UsageError("Pool samples, misfits and QoIs must be aligned")
        for array in (samples, misfits, qois):
            array.flags.writeable = False
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "misfits", misfits)
        object.__setattr__(self, "qois", qois)

    @property
    def size(self) -> int:
        return self.samples.shape[0]

    def __len__(self) -> int:
        return self.size
