from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

PASS = "pass"
FAIL = "fail"
WITNESS = "witness"
NONE_UP_TO_BOUND = "none-up-to-bound"


@dataclass
class Report:
    """Outcome of one verification check."""

    check: str
    verdict: str
    residual: Any = None
    details: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.verdict in (PASS, WITNESS)

    def to_json(self) -> dict:
        return {
            "name": self.check,
            "verdict": self.verdict,
            "residual": jsonable(self.residual),
            "details": jsonable(self.details),
        }


def jsonable(value):
    """Deterministic JSON-friendly rendering (exact rationals become strings)."""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, float):
        return float(f"{value:.12g}")
    if isinstance(value, (bool, int, str)) or value is None:
        return value
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        return jsonable(value.tolist())
    return str(value)
