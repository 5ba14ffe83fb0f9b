"""Six-dimension turn scoring.

Format (10) - exactly one fenced Python block in the response.
Grounding (25) - weighted required/forbidden code patterns.
Continuity (15) - carry-forward patterns for surviving prior edits
  (a turn with nothing to carry forward passes vacuously).
Execution (20) - exit code zero.
Semantic (25) - structured result vs. the oracle, 1e-4 absolute
  tolerance on numbers, exact match for strings / integers / booleans.
Artifact (5) - expected plot file named in the result and present on
  disk; not applicable (max 0) when no plot was requested.

A turn passes only at full marks in every applicable dimension; the turn
percentage normalizes by the applicable maximum so plotless turns can
still reach 100.0.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from ..execution import ExecutionRecord, count_fenced_blocks

SEMANTIC_TOLERANCE = 1e-4

DIMENSIONS = ("format", "grounding", "continuity", "execution", "semantic", "artifact")
DIMENSION_MAX = {"format": 10.0, "grounding": 25.0, "continuity": 15.0,
                 "execution": 20.0, "semantic": 25.0, "artifact": 5.0}

_EPS = 1e-9


@dataclass(frozen=True)
class WeightedCheck:
    weight: float
    pattern: str
    kind: str = "required"  # "required" | "forbidden"

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError("check weights must be positive")
        if self.kind not in ("required", "forbidden"):
            raise ValueError(f"unknown check kind '{self.kind}'")

    def to_dict(self) -> dict:
        return {"weight": self.weight, "pattern": self.pattern, "kind": self.kind}

    @classmethod
    def from_dict(cls, raw: dict) -> "WeightedCheck":
        return cls(weight=float(raw["weight"]), pattern=raw["pattern"],
                   kind=raw.get("kind", "required"))


@dataclass(frozen=True)
class SemanticKeySpec:
    expected: dict
    tolerance: float = SEMANTIC_TOLERANCE

    @property
    def keys(self) -> list[str]:
        return list(self.expected)

    def to_dict(self) -> dict:
        return {"expected": dict(self.expected), "tolerance": self.tolerance}


@dataclass
class TurnScore:
    s_fmt: float
    s_gnd: float
    s_cont: float
    s_exec: float
    s_sem: float
    s_art: float
    artifact_applicable: bool
    failure_categories: list[str] = field(default_factory=list)

    @property
    def total(self) -> float:
        return self.s_fmt + self.s_gnd + self.s_cont + self.s_exec + self.s_sem + self.s_art

    @property
    def applicable_max(self) -> float:
        return 100.0 if self.artifact_applicable else 95.0

    @property
    def percentage(self) -> float:
        return 100.0 * self.total / self.applicable_max

    @property
    def passed(self) -> bool:
        return not self.failure_categories

    def to_dict(self) -> dict:
        return {
            "s_fmt": self.s_fmt, "s_gnd": self.s_gnd, "s_cont": self.s_cont,
            "s_exec": self.s_exec, "s_sem": self.s_sem, "s_art": self.s_art,
            "total": self.total, "applicable_max": self.applicable_max,
            "percentage": self.percentage, "passed": self.passed,
            "artifact_applicable": self.artifact_applicable,
            "failure_categories": list(self.failure_categories),
        }


def weighted_pattern_score(code: str, checks: list[WeightedCheck], scale: float) -> float:
    """Weighted pattern fraction scaled to the dimension maximum.

    Matched forbidden checks subtract their weight from the numerator,
    floored at zero, so every score stays within [0, scale].
    """
    required = [c for c in checks if c.kind == "required"]
    if not required:
        raise ValueError("at least one required check is needed")
    numerator = sum(c.weight for c in required if re.search(c.pattern, code))
    denominator = sum(c.weight for c in required)
    penalty = sum(c.weight for c in checks
                  if c.kind == "forbidden" and re.search(c.pattern, code))
    return scale * max(numerator - penalty, 0.0) / denominator


def values_match(actual, expected, tolerance: float = SEMANTIC_TOLERANCE) -> bool:
    """Numeric values match within the absolute tolerance, others exactly."""
    if isinstance(expected, bool) or isinstance(actual, bool):
        return actual is expected
    if isinstance(expected, int) and not isinstance(expected, bool):
        return isinstance(actual, (int, float)) and actual == expected
    if isinstance(expected, float):
        if not isinstance(actual, (int, float)):
            return False
        return abs(float(actual) - expected) <= tolerance
    return actual == expected


def semantic_score(result: dict | None, spec: SemanticKeySpec) -> float:
    """Fraction of oracle keys matched, scaled to 25; missing keys mismatch."""
    if not spec.keys:
        raise ValueError("semantic spec needs at least one key")
    if not result:
        return 0.0
    matches = sum(
        1 for key, expected in spec.expected.items()
        if key in result and values_match(result[key], expected, spec.tolerance)
    )
    return 25.0 * matches / len(spec.keys)


def score_turn(response_text: str, code: str, record: ExecutionRecord | None,
               grounding: list[WeightedCheck], continuity: list[WeightedCheck],
               sem_spec: SemanticKeySpec, expects_plot: bool,
               plot_file: str | None, workspace: str | Path) -> TurnScore:
    s_fmt = 10.0 if count_fenced_blocks(response_text) == 1 else 0.0
    s_gnd = weighted_pattern_score(code, grounding, 25.0) if code else 0.0
    if continuity:
        s_cont = weighted_pattern_score(code, continuity, 15.0) if code else 0.0
    else:
        s_cont = 15.0  # nothing to carry forward: vacuous full marks
    s_exec = 20.0 if record is not None and record.exit_status == 0 else 0.0
    s_sem = semantic_score(record.result if record else None, sem_spec)

    if expects_plot:
        named = bool(record and record.result
                     and record.result.get("plot_file") == plot_file)
        exists = bool(plot_file and (Path(workspace) / plot_file).exists())
        s_art = 5.0 if named and exists else 0.0
    else:
        s_art = 0.0

    failures = []
    per_dim = {"format": s_fmt, "grounding": s_gnd, "continuity": s_cont,
               "execution": s_exec, "semantic": s_sem, "artifact": s_art}
    for dim in DIMENSIONS:
        if dim == "artifact" and not expects_plot:
            continue  # not applicable: counted as full marks for the pass rule
        if per_dim[dim] < DIMENSION_MAX[dim] - _EPS:
            failures.append(dim)

    return TurnScore(
        s_fmt=s_fmt, s_gnd=s_gnd, s_cont=s_cont, s_exec=s_exec,
        s_sem=s_sem, s_art=s_art,
        artifact_applicable=expects_plot,
        failure_categories=failures,
    )


def conversation_score(turns: list[TurnScore]) -> float:
    if not turns:
        return math.nan
    return sum(t.percentage for t in turns) / len(turns)
