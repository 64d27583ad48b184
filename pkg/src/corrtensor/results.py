"""Result containers shared by the region modules."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any

import numpy as np


class Verdict(str, enum.Enum):
    CERTIFIED_NON_MEMBER = "CertifiedNonMember"
    HEURISTIC_MEMBER = "HeuristicMember"
    MEMBER = "Member"
    NON_MEMBER = "NonMember"

    @property
    def is_member(self) -> bool:
        return self in (Verdict.HEURISTIC_MEMBER, Verdict.MEMBER)


@dataclass
class MembershipResult:
    """Verdict for one point of a region.

    ``margin`` is the best-found value of the relevant G (positive means a
    violation). ``witness`` holds the violating channel or function(s).
    Exact verdicts (eigenvalue tests) use ``Member``/``NonMember``.
    """

    verdict: Verdict
    margin: float
    witness: Any = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def is_member(self) -> bool:
        return self.verdict.is_member

    def to_json(self) -> dict:
        w = self.witness
        if isinstance(w, np.ndarray):
            w = w.tolist()
        elif isinstance(w, tuple):
            w = [x.tolist() if isinstance(x, np.ndarray) else x for x in w]
        return {"verdict": self.verdict.value, "margin": self.margin, "witness": w,
                "diagnostics": _jsonable(self.diagnostics)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
