"""Pass/fail report containers shared by the model, generator and heat checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any


class HeatfluxError(Exception):
    """Base class for all errors raised by the package."""


@dataclass
class CheckItem:
    label: str
    measured: float
    expected: float | None = None
    residual: float = 0.0
    passed: bool = True
    tolerance: float | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "measured": _json_float(self.measured),
            "expected": _json_float(self.expected),
            "residual": _json_float(self.residual),
            "tolerance": _json_float(self.tolerance),
            "passed": self.passed,
        }


@dataclass
class VerificationReport:
    """A named check with one record per compared item.

    ``passed`` is derived from the items; ``skipped`` lists items that were
    excluded from comparison (e.g. underflowed probabilities) with a reason.
    """

    name: str
    items: list[CheckItem] = field(default_factory=list)
    tolerances: dict[str, float] = field(default_factory=dict)
    skipped: list[str] = field(default_factory=list)

    def add(self, label, measured, expected=None, residual=0.0, tol=None, ok=None):
        if ok is None:
            ok = tol is None or abs(residual) <= tol
        item = CheckItem(label, float(measured), None if expected is None else float(expected),
                         float(residual), bool(ok), tol)
        self.items.append(item)
        return item

    @property
    def passed(self) -> bool:
        return all(item.passed for item in self.items)

    @property
    def failures(self) -> list[CheckItem]:
        return [item for item in self.items if not item.passed]

    def worst(self) -> CheckItem | None:
        """Item with the largest |residual| relative to its tolerance."""
        if not self.items:
            return None

        def score(item):
            r = abs(item.residual)
            if item.tolerance:
                return (not item.passed, r / item.tolerance)
            return (not item.passed, r)

        return max(self.items, key=score)

    def max_residual(self) -> float:
        return max((abs(i.residual) for i in self.items), default=0.0)

    def to_dict(self) -> dict[str, Any]:
        worst = self.worst()
        return {
            "name": self.name,
            "passed": self.passed,
            "n_items": len(self.items),
            "n_failed": len(self.failures),
            "max_abs_residual": _json_float(self.max_residual()),
            "worst": worst.to_dict() if worst else None,
            "tolerances": {k: _json_float(v) for k, v in self.tolerances.items()},
            "skipped": list(self.skipped),
            "items": [item.to_dict() for item in self.items],
        }

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        line = f"{status} {self.name}: {len(self.items)} items, max |residual| {self.max_residual():.3e}"
        if not self.passed:
            w = self.worst()
            line += f"; worst {w.label} residual {w.residual:.3e}"
        return line


def _json_float(x):
    if x is None:
        return None
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return repr(x)
    return x
