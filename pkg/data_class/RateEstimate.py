from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional


@dataclass(frozen=True)
class RateEstimate:
    """Fitted bias, variance and cost exponents in M_l and the cost regime they imply.

    ``available`` is False when there are too few levels to fit.
    """

    available: bool
    theta_b: Optional[float] = None
    theta_v: Optional[float] = None
    theta_c: Optional[float] = None
    theta_b_stderr: Optional[float] = None
    theta_v_stderr: Optional[float] = None
    theta_c_stderr: Optional[float] = None
    regime: str = "unavailable"
    cost_exponent: Optional[float] = None
    log_factor: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
