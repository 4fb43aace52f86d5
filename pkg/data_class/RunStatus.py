from enum import Enum
from typing import Iterable


class RunStatus(Enum):
    """Overall health of a sampler run, raised by the issues it collects."""

    PASS = "PASS"
    WARNING = "WARNING"
    FAIL = "FAIL"

    @property
    def severity(self) -> int:
        return _SEVERITY[self]

    def raise_status_level_to(self, new_status: "RunStatus") -> "RunStatus":
        return new_status if new_status.severity > self.severity else self

    @classmethod
    def worst(cls, statuses: Iterable["RunStatus"]) -> "RunStatus":
        status = cls.PASS
        for other in statuses:
            status = status.raise_status_level_to(other)
        return status


_SEVERITY = {RunStatus.PASS: 0, RunStatus.WARNING: 1, RunStatus.FAIL: 2}
