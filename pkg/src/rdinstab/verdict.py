"""Three-valued outcome shared by all certification methods."""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

__all__ = ["VerdictKind", "Verdict"]


class VerdictKind(str, enum.Enum):
    UNSTABLE = "U"
    STABLE_INDICATED = "S"
    INCONCLUSIVE = "I"


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (complex, np.complexfloating)):
        return [float(v.real), float(v.imag)]
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, enum.Enum):
        return v.value
    if isinstance(v, float) and not np.isfinite(v):
        return None
    return v


@dataclass(frozen=True)
class Verdict:
    """Outcome of one method on one parameter set.

    ``UNSTABLE`` is a certificate of instability.  ``STABLE_INDICATED``
    means the method found no evidence of instability within its scope and
    is never a proof of stability.
    """

    kind: VerdictKind
    method: str
    evidence: dict = field(default_factory=dict)

    @property
    def code(self) -> str:
        return self.kind.value

    @property
    def unstable(self) -> bool:
        return self.kind is VerdictKind.UNSTABLE

    def to_dict(self, runtime_ms=None) -> dict:
        d = {"verdict": self.code, "method": self.method, "evidence": _jsonable(self.evidence)}
        if runtime_ms is not None:
            d["runtime_ms"] = float(runtime_ms)
        return d

    def to_json(self, runtime_ms=None, **kw) -> str:
        return json.dumps(self.to_dict(runtime_ms), **kw)


def unstable(method, **evidence):
    return Verdict(VerdictKind.UNSTABLE, method, evidence)


def stable_indicated(method, **evidence):
    return Verdict(VerdictKind.STABLE_INDICATED, method, evidence)


def inconclusive(method, **evidence):
    return Verdict(VerdictKind.INCONCLUSIVE, method, evidence)
