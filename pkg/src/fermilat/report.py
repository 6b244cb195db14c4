"""Structured verdict records shared by every verification routine."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field


def inputs_hash(*parts):
    h = hashlib.sha256()
    for p in parts:
        h.update(repr(p).encode())
        h.update(b"\x00")
    return h.hexdigest()[:16]


def _jsonable(x):
    if isinstance(x, float) and not math.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    return x


@dataclass
class Report:
    """Residuals of one check and the verdict at a stated tolerance.

    ``kind`` is ``"identity"`` (pass iff every residual <= tolerance) or
    ``"negative_control"`` (pass iff some residual exceeds the tolerance).
    """

    check: str
    residuals: list
    tolerance: float
    inputs: str = ""
    kind: str = "identity"
    details: dict = field(default_factory=dict)

    @property
    def verdict(self):
        if not self.residuals:
            return self.kind == "identity"
        worst = max(self.residuals)
        if self.kind == "negative_control":
            return worst > self.tolerance
        return worst <= self.tolerance

    @property
    def max_residual(self):
        return max(self.residuals) if self.residuals else 0.0

    def to_dict(self):
        return {
            "check": self.check,
            "inputs-hash": self.inputs,
            "residuals": [_jsonable(float(r)) for r in self.residuals],
            "verdict": "pass" if self.verdict else "fail",
            "tolerance": self.tolerance,
            "kind": self.kind,
            "details": {k: _jsonable(v) for k, v in self.details.items()},
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def line(self):
        tag = "PASS" if self.verdict else "FAIL"
        return f"[{tag}] {self.check}: max residual {self.max_residual:.3e} (tol {self.tolerance:.1e}, {self.kind})"
