"""Turn reports and session/global event logs.

Every session writes an append-only ``session_log.json`` and mirrors each
event into a shared newline-delimited global stream, so benchmark
failures, deployment feedback, and fix events all travel through one
pipeline into failure attribution.
"""

from __future__ import annotations

import json
import logging
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import PersistenceFailure
from .execution import ExecutionRecord, GeneratedScript
from .intent import ParsedObjective

logger = logging.getLogger(__name__)

EVENT_KINDS = {"turn", "generation", "static_check", "execution",
               "fix", "feedback", "profile_update"}


@dataclass
class LogEvent:
    timestamp: float
    seq: int
    event_kind: str
    payload: dict

    def to_dict(self) -> dict:
        return {"timestamp": self.timestamp, "seq": self.seq,
                "event_kind": self.event_kind, "payload": self.payload}


class GlobalStream:
    """Append-only ndjson mirror shared by all sessions (single writer)."""

    def __init__(self, path: str | Path | None):
        self.path = Path(path) if path else None
        self._lock = threading.Lock()
        self.memory: list[dict] = []

    def append(self, record: dict) -> None:
        with self._lock:
            self.memory.append(record)
            if self.path is None:
                return
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, sort_keys=True) + "\n")
            except OSError as exc:
                logger.warning("global stream write failed, keeping in memory: %s", exc)


class SessionLog:
    """Per-session JSON log; events are append-only and sequence-ordered."""

    def __init__(self, session_id: str, path: str | Path | None = None):
        self.session_id = session_id
        self.created_at = datetime.now(timezone.utc).isoformat()
        self.path = Path(path) if path else None
        self.events: list[LogEvent] = []
        self._seq = 0
        self._persist_warned = False

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "created_at": self.created_at,
            "events": [e.to_dict() for e in self.events],
        }

    def save(self) -> None:
        if self.path is None:
            return
        try:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        except OSError as exc:
            if not self._persist_warned:
                logger.warning("session log persist failed, continuing in memory: %s", exc)
                self._persist_warned = True
            raise PersistenceFailure(str(exc)) from exc


def append_event(log: SessionLog, event_kind: str, payload: dict,
                 stream: GlobalStream | None = None) -> LogEvent:
    """Append an event to the session log and mirror it to the global stream.

    Timestamps are monotone non-decreasing; same-millisecond events are
    ordered by the sequence counter. Disk failures downgrade to a warning
    so the session can continue in memory.
    """
    if event_kind not in EVENT_KINDS:
        raise ValueError(f"unknown event kind '{event_kind}'")
    ts = time.time()
    if log.events and ts < log.events[-1].timestamp:
        ts = log.events[-1].timestamp
    log._seq += 1
    event = LogEvent(timestamp=ts, seq=log._seq, event_kind=event_kind,
                     payload=payload)
    log.events.append(event)
    try:
        log.save()
    except PersistenceFailure:
        pass
    if stream is not None:
        stream.append({"session_id": log.session_id, **event.to_dict()})
    return event


@dataclass
class TurnReport:
    summary: str
    result: dict
    plot_files: list[str] = field(default_factory=list)
    code: str = ""
    log_excerpt: str = ""
    fix_history: list[str] = field(default_factory=list)
    fix_available: bool = False
    turn_index: int = 0
    response_text: str = ""

    def to_dict(self) -> dict:
        return {
            "summary": self.summary,
            "result": self.result,
            "plot_files": list(self.plot_files),
            "code": self.code,
            "log_excerpt": self.log_excerpt,
            "fix_history": list(self.fix_history),
            "fix_available": self.fix_available,
            "turn_index": self.turn_index,
            "response_text": self.response_text,
        }


def _tail(text: str, n_lines: int = 15) -> str:
    lines = text.splitlines()
    return "\n".join(lines[-n_lines:])


def package_report(record: ExecutionRecord | None, script: GeneratedScript | None,
                   objective: ParsedObjective | None) -> TurnReport:
    """Template a user-readable summary whose every number comes from result."""
    code = script.code if script else ""
    if record is None:
        return TurnReport(summary="No script was executed for this turn.",
                          result={}, code=code)

    excerpt = _tail((record.stdout + "\n" + record.stderr).strip())
    if record.exit_status != 0:
        return TurnReport(
            summary=f"Execution failed: {record.error_class or 'NonzeroExit'}.",
            result={},
            code=code,
            log_excerpt=excerpt,
            fix_available=True,
        )

    result = record.result or {}
    if not result:
        return TurnReport(
            summary="The script ran but produced no structured output.",
            result={}, code=code, log_excerpt=excerpt, plot_files=record.plot_files,
        )

    parts = []
    case = result.get("case")
    if case:
        parts.append(f"Study of case {case} completed.")
    if "converged" in result:
        if result.get("islanded"):
            parts.append("The network islanded; power flow was not solved.")
        elif result["converged"]:
            parts.append("Power flow converged.")
        else:
            parts.append("Power flow did not converge.")
    if "min_voltage_pu" in result and "min_voltage_bus" in result:
        parts.append(
            f"Lowest voltage {result['min_voltage_pu']:.4f} pu at {result['min_voltage_bus']}."
        )
    if "total_load_mw" in result:
        parts.append(f"Total load {result['total_load_mw']:.2f} MW.")
    if "rank_1_bus" in result:
        parts.append(f"Top-ranked bus: {result['rank_1_bus']}.")
    if "rank_1_line" in result:
        parts.append(f"Top-ranked line: {result['rank_1_line']}.")
    if "n_contingencies" in result:
        parts.append(
            f"Screened {result['n_contingencies']} contingencies: "
            f"{result['n_converged']} converged, {result['n_islanded']} islanding."
        )
    if "plot_file" in result:
        parts.append(f"Plot saved as {result['plot_file']}.")
    if not parts:
        parts.append("Study completed.")

    return TurnReport(
        summary=" ".join(parts),
        result=result,
        plot_files=list(record.plot_files),
        code=code,
        log_excerpt=excerpt,
    )
