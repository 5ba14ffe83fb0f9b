"""Verification oracle: expected results via direct backend replay.

The oracle never sees the agent's prompts, parser, or generated code: it
replays the scenario's recorded cumulative operations through straight
backend API calls and extracts the expected key-value pairs. Results are
cached by (scenario_id, turn_index).
"""

from __future__ import annotations

import threading
from pathlib import Path

from .. import backend
from ..errors import OracleNonConvergence
from .scoring import SemanticKeySpec
from .suite import ScenarioSpec, materialize_uploaded_case
from .tasks import TASK_TYPES


class OracleCache:
    """Read-mostly concurrent cache with single-writer insertion per key."""

    def __init__(self):
        self._data: dict[tuple[str, int], SemanticKeySpec] = {}
        self._lock = threading.Lock()

    def get_or_compute(self, key, compute):
        with self._lock:
            if key in self._data:
                return self._data[key]
        value = compute()
        with self._lock:
            self._data.setdefault(key, value)
            return self._data[key]


def _load_scenario_case(scenario: ScenarioSpec, case_dir: Path) -> backend.System:
    if scenario.source == "builtin":
        return backend.get_case(scenario.case_name)
    path = case_dir / scenario.uploaded_file
    if not path.exists():
        materialize_uploaded_case(scenario.family, path)
    return backend.load(path)


def _surviving_ops(scenario: ScenarioSpec, turn_index: int) -> list[tuple[str, dict]]:
    """Modification ops of turns 1..turn_index with later same-target wins.

    Mirrors the documented ledger-supersession contract without sharing
    code with the intent parser.
    """
    def key(name: str, params: dict):
        if name == "slack_setpoint":
            return ("setpoint", "slack")
        if name == "pv_setpoint":
            return ("setpoint", "pv", params["bus"])
        if name == "targeted_load":
            return ("busload", params["bus"])
        if name == "targeted_gen":
            return ("busgen", params["bus"])
        if name in ("line_outage", "line_outage_islanding"):
            return ("outage", frozenset((params["bus_a"], params["bus_b"])))
        return None

    ops: list[tuple[str, dict]] = []
    for turn in scenario.turns[:turn_index]:
        if not TASK_TYPES[turn.task_type].is_modification:
            continue
        k = key(turn.task_type, turn.params)
        if k is not None:
            ops = [(n, p) for n, p in ops if key(n, p) != k]
        ops.append((turn.task_type, turn.params))
    return ops


def expected_payload(scenario: ScenarioSpec, turn_index: int, case_dir: Path) -> dict:
    """Replay cumulative ops 1..turn_index and compute the expected values."""
    ss = _load_scenario_case(scenario, case_dir)
    ops = _surviving_ops(scenario, turn_index)
    for name, params in ops:
        if TASK_TYPES[name].phase == "pre":
            TASK_TYPES[name].apply(ss, params)
    ss.setup()
    for name, params in ops:
        if TASK_TYPES[name].phase == "post":
            TASK_TYPES[name].apply(ss, params)
    turn = scenario.turns[turn_index - 1]
    return TASK_TYPES[turn.task_type].oracle_payload(ss, turn.params)


def verify_expected(scenario: ScenarioSpec, turn_index: int, case_dir: str | Path,
                    cache: OracleCache | None = None) -> SemanticKeySpec:
    """The semantic key spec for one scenario turn.

    Non-convergence (including islanding) is recorded rather than raised:
    the key spec then expects the convergence-failure flags instead of
    numeric values. OracleNonConvergence is raised only when the payload
    carries no usable flags at all.
    """
    case_dir = Path(case_dir)

    def compute() -> SemanticKeySpec:
        payload = expected_payload(scenario, turn_index, case_dir)
        if not payload:
            raise OracleNonConvergence(
                f"oracle produced no keys for {scenario.scenario_id} turn {turn_index}"
            )
        return SemanticKeySpec(expected=payload)

    if cache is None:
        return compute()
    return cache.get_or_compute((scenario.scenario_id, turn_index), compute)
