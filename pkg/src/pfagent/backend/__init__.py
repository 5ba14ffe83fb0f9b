"""Simulation backend: case catalog, network editing API, power-flow solver.

Generated study scripts target this package directly::

    from pfagent import backend
    ss = backend.get_case("ieee14")
    ss.setup()
    res = ss.run_power_flow()
"""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import CaseLoadFailure
from .catalog import BUILTIN_CASE_NAMES, build_case
from .network import Bus, Generator, Line, Load, SlackGen, System
from .solver import PowerFlowResult, connected_to_slack

__all__ = [
    "BUILTIN_CASE_NAMES",
    "Bus", "Generator", "Line", "Load", "SlackGen", "System",
    "PowerFlowResult", "connected_to_slack",
    "get_case", "load", "list_cases",
]


def get_case(name: str) -> System:
    """Load a shipped benchmark case by catalog name (not yet set up)."""
    return build_case(name)


def load(path: str | Path) -> System:
    """Load a user-provided case file (JSON export) from disk."""
    path = Path(path)
    if not path.exists():
        raise CaseLoadFailure(f"case file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CaseLoadFailure(f"cannot parse case file {path.name}: {exc}") from exc
    if not isinstance(raw, dict):
        raise CaseLoadFailure(f"case file {path.name} must hold a JSON object")
    return System.from_dict(raw)


def list_cases() -> tuple[str, ...]:
    return BUILTIN_CASE_NAMES
