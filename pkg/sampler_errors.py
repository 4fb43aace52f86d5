"""Exception types raised by the sampler.

The CLI maps ``ConfigError``/``UsageError``/``DimensionError`` to exit code 2
and ``NumericalError`` (and subclasses) to exit code 3.
"""

from typing import Any, Dict, List, Optional, Sequence


class SamplerError(Exception):
    """Base class for all sampler errors."""


class ConfigError(SamplerError, ValueError):
    """Invalid configuration value(s)."""

    def __init__(self, problems: Sequence[str] | str):
        if isinstance(problems, str):
            problems = [problems]
        self.problems: List[str] = list(problems)
        super().__init__("; ".join(self.problems))


class DimensionError(SamplerError, ValueError):
    """Vector or matrix sizes do not match the level hierarchy."""


class UsageError(SamplerError, ValueError):
    """An operation was called in a state where it is not defined."""


class NumericalError(SamplerError, RuntimeError):
    """A numerical computation failed."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.details = details or {}


class SolverError(NumericalError):
    """The finite element solve failed."""

    def __init__(self, message: str, offending_nodes: Sequence[int] = ()):
        super().__init__(
            message, {"offending_nodes": [int(i) for i in offending_nodes]}
        )
        self.offending_nodes = [int(i) for i in offending_nodes]


class EigensolverError(NumericalError):
    """The iterative eigensolver stagnated or did not converge."""

    def __init__(self, message: str, residuals: Sequence[float] = ()):
        super().__init__(
            message, {"ritz_residuals": [float(r) for r in residuals]}
        )
        self.residuals = [float(r) for r in residuals]
