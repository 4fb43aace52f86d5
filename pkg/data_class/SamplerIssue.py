from dataclasses import dataclass, field
from typing import Any, Dict

from .RunStatus import RunStatus


@dataclass
class SamplerIssue:
    """Represents a problem noticed while building or running the sampler."""

    issue_type: str
    description: str
    severity: RunStatus
    level: int | None = None
    additional_info: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "issue_type": self.issue_type,
            "description": self.description,
            "severity": self.severity.value,
            "level": self.level,
            "additional_info": self.additional_info,
        }
