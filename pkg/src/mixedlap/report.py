from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one numerical check.

    ``margin`` is signed so that nonnegative means the checked inequality held;
    ``witness`` locates the worst case (a node coordinate, trial index, ...).
    """

    name: str
    passed: bool
    margin: float
    witness: Any = None
    params: dict = field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: margin={self.margin:.6g} witness={self.witness}"
