"""Result record shared by the property checkers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional


@dataclass
class CheckReport:
    """Outcome of one property check; ``witness`` is set exactly when it failed."""

    name: str
    passed: bool
    samples: int
    witness: Optional[dict] = None
    slack_used: float = 0.0
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.passed and self.witness is not None:
            raise ValueError("a passing check carries no witness")
        if not self.passed and self.witness is None:
            raise ValueError("a failing check needs a witness")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "passed": self.passed,
            "samples": self.samples,
            "witness": self.witness,
            "slack_used": self.slack_used,
            "details": self.details,
        }
