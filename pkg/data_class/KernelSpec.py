from dataclasses import dataclass

from sampler_errors import ConfigError

SUPPORTED_KERNELS = ("exponential",)


@dataclass(frozen=True)
class KernelSpec:
    """Covariance kernel variance * exp(-correlation_rate * |x - x'|)."""

    kind: str = "exponential"
    correlation_rate: float = 5.0
    variance: float = 1.0

    def __post_init__(self):
        problems = []
        if self.kind not in SUPPORTED_KERNELS:
            problems.append(
                f"Unsupported kernel '{self.kind}', expected one of {SUPPORTED_KERNELS}"
            )
        if not self.correlation_rate > 0:
            problems.append(f"correlation_rate must be positive, got {self.correlation_rate}")
        if not self.variance > 0:
            problems.append(f"variance must be positive, got {self.variance}")
        if problems:
            raise ConfigError(problems)
