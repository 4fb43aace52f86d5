from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class VarianceDecomposition:
    """Var(D) next to Var(Q_l) + Var(Q_{l-1}) - 2 Cov(Q_l, Q_{l-1})."""

    variance_d: float
    variance_fine: float
    variance_coarse: float
    covariance: float

    @property
    def decomposed(self) -> float:
        return self.variance_fine + self.variance_coarse - 2.0 * self.covariance

    @property
    def correlation(self) -> float:
        scale = (self.variance_fine * self.variance_coarse) ** 0.5
        return self.covariance / scale if scale > 0 else 0.0

    def to_dict(self):
        summary = asdict(self)
        summary["correlation"] = self.correlation
        return summary
