"""Network model and case-modification API of the simulation backend.

A :class:`System` is created un-set-up, may receive structural additions
(new loads), is then frozen with :meth:`System.setup`, and afterwards
accepts parameter edits (scaling, setpoints, outages) before a power-flow
run. The workflow order is enforced so generated scripts cannot call the
API out of sequence.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import CaseLoadFailure, UnknownDevice, WorkflowOrderError
from .solver import PowerFlowResult, solve_power_flow


@dataclass
class Bus:
    idx: str
    number: int
    name: str = ""
    v_init: float = 1.0
    shunt_b: float = 0.0  # pu susceptance at the bus


@dataclass
class Line:
    idx: str
    bus1: int
    bus2: int
    r: float
    x: float
    b: float = 0.0
    tap: float = 1.0
    in_service: bool = True


@dataclass
class Load:
    idx: str
    bus: int
    p: float  # pu on system base
    q: float
    in_service: bool = True


@dataclass
class Generator:
    """PV machine: fixed active power and voltage magnitude setpoint."""

    idx: str
    bus: int
    p: float
    v: float
    in_service: bool = True


@dataclass
class SlackGen:
    idx: str
    bus: int
    v: float
    a: float = 0.0  # reference angle, degrees


@dataclass
class System:
    """An editable power-system case bound to the backend solver."""

    name: str
    base_mva: float = 100.0
    buses: list[Bus] = field(default_factory=list)
    lines: list[Line] = field(default_factory=list)
    loads: list[Load] = field(default_factory=list)
    gens: list[Generator] = field(default_factory=list)
    slack: SlackGen | None = None
    is_setup: bool = False

    # -- lookup helpers ----------------------------------------------------

    def bus_numbers(self) -> list[int]:
        return [b.number for b in self.buses]

    def find_bus(self, number: int) -> Bus:
        for b in self.buses:
            if b.number == number:
                return b
        raise UnknownDevice(f"no bus numbered {number} in case '{self.name}'")

    def find_line(self, idx: str) -> Line:
        for ln in self.lines:
            if ln.idx == idx:
                return ln
        raise UnknownDevice(f"no line '{idx}' in case '{self.name}'")

    def find_gen(self, idx: str) -> Generator:
        for g in self.gens:
            if g.idx == idx:
                return g
        raise UnknownDevice(f"no generator '{idx}' in case '{self.name}'")

    def lines_between(self, bus_a: int, bus_b: int) -> list[Line]:
        pair = {bus_a, bus_b}
        return [ln for ln in self.lines if {ln.bus1, ln.bus2} == pair]

    def loads_at(self, bus: int) -> list[Load]:
        return [ld for ld in self.loads if ld.bus == bus]

    def gens_at(self, bus: int) -> list[Generator]:
        return [g for g in self.gens if g.bus == bus]

    def total_load_mw(self) -> float:
        return sum(ld.p for ld in self.loads if ld.in_service) * self.base_mva

    # -- workflow ------------------------------------------------------------

    def setup(self) -> "System":
        """Freeze the case structure and validate device references."""
        if self.is_setup:
            raise WorkflowOrderError("setup() called twice")
        if self.slack is None:
            raise CaseLoadFailure(f"case '{self.name}' has no slack generator")
        numbers = set(self.bus_numbers())
        if len(numbers) != len(self.buses):
            raise CaseLoadFailure(f"case '{self.name}' has duplicate bus numbers")
        for ln in self.lines:
            if ln.bus1 not in numbers or ln.bus2 not in numbers:
                raise CaseLoadFailure(f"line '{ln.idx}' references a missing bus")
        for ld in self.loads:
            if ld.bus not in numbers:
                raise CaseLoadFailure(f"load '{ld.idx}' references a missing bus")
        for g in self.gens:
            if g.bus not in numbers:
                raise CaseLoadFailure(f"generator '{g.idx}' references a missing bus")
        if self.slack.bus not in numbers:
            raise CaseLoadFailure("slack generator references a missing bus")
        self.is_setup = True
        return self

    def _require_setup(self, what: str) -> None:
        if not self.is_setup:
            raise WorkflowOrderError(f"{what} requires setup(); call setup() first")

    # -- structural additions (before setup) --------------------------------

    def add_load(self, bus: int, p_mw: float, q_mvar: float = 0.0) -> Load:
        """Attach a new load; structural, so only allowed before setup()."""
        if self.is_setup:
            raise WorkflowOrderError("add_load() must be called before setup()")
        self.find_bus(bus)
        idx = f"PQ_{len(self.loads) + 1}"
        load = Load(idx=idx, bus=bus, p=p_mw / self.base_mva, q=q_mvar / self.base_mva)
        self.loads.append(load)
        return load

    # -- parameter edits (after setup) ---------------------------------------

    def scale_loads(self, factor: float) -> None:
        """Multiply every in-service load's P and Q by ``factor``."""
        self._require_setup("scale_loads()")
        for ld in self.loads:
            ld.p *= factor
            ld.q *= factor

    def set_slack_voltage(self, v_pu: float) -> None:
        self._require_setup("set_slack_voltage()")
        assert self.slack is not None
        self.slack.v = v_pu

    def set_pv_voltage(self, gen_idx: str, v_pu: float) -> None:
        self._require_setup("set_pv_voltage()")
        self.find_gen(gen_idx).v = v_pu

    def set_bus_load(self, bus: int, p_mw: float, q_mvar: float | None = None) -> None:
        """Set the total load at a bus to the given power (splits evenly)."""
        self._require_setup("set_bus_load()")
        loads = [ld for ld in self.loads_at(bus) if ld.in_service]
        if not loads:
            raise UnknownDevice(f"no load connected to bus {bus}")
        for ld in loads:
            ld.p = p_mw / self.base_mva / len(loads)
            if q_mvar is not None:
                ld.q = q_mvar / self.base_mva / len(loads)

    def set_bus_gen(self, bus: int, p_mw: float) -> None:
        """Set the scheduled active power of the generator at a bus."""
        self._require_setup("set_bus_gen()")
        gens = [g for g in self.gens_at(bus) if g.in_service]
        if not gens:
            raise UnknownDevice(f"no generator connected to bus {bus}")
        for g in gens:
            g.p = p_mw / self.base_mva / len(gens)

    def line_outage(self, line_idx: str) -> None:
        """Take a line out of service by its exact string identifier."""
        self._require_setup("line_outage()")
        self.find_line(line_idx).in_service = False

    def line_outage_between(self, bus_a: int, bus_b: int) -> list[str]:
        """Take every line in the corridor (bus_a, bus_b) out of service."""
        self._require_setup("line_outage_between()")
        lines = self.lines_between(bus_a, bus_b)
        if not lines:
            raise UnknownDevice(f"no line between bus {bus_a} and bus {bus_b}")
        for ln in lines:
            ln.in_service = False
        return [ln.idx for ln in lines]

    # Low-level alias kept for backward compatibility with older scripts.
    # Prefer line_outage_between(); graded study scripts must use it.
    def trip_line_by_buses(self, bus_a: int, bus_b: int) -> list[str]:
        self._require_setup("trip_line_by_buses()")
        lines = self.lines_between(bus_a, bus_b)
        if not lines:
            raise UnknownDevice(f"no line between bus {bus_a} and bus {bus_b}")
        for ln in lines:
            ln.in_service = False
        return [ln.idx for ln in lines]

    def restore_line(self, line_idx: str) -> None:
        self._require_setup("restore_line()")
        self.find_line(line_idx).in_service = True

    def copy(self) -> "System":
        return copy.deepcopy(self)

    # -- solution -------------------------------------------------------------

    def run_power_flow(self, max_iter: int = 25, tol: float = 1e-8) -> PowerFlowResult:
        self._require_setup("run_power_flow()")
        return solve_power_flow(self, max_iter=max_iter, tol=tol)

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "base_mva": self.base_mva,
            "buses": [vars(b).copy() for b in self.buses],
            "lines": [vars(ln).copy() for ln in self.lines],
            "loads": [vars(ld).copy() for ld in self.loads],
            "gens": [vars(g).copy() for g in self.gens],
            "slack": vars(self.slack).copy() if self.slack else None,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "System":
        try:
            sys_ = cls(
                name=str(raw["name"]),
                base_mva=float(raw.get("base_mva", 100.0)),
                buses=[Bus(**b) for b in raw["buses"]],
                lines=[Line(**ln) for ln in raw["lines"]],
                loads=[Load(**ld) for ld in raw["loads"]],
                gens=[Generator(**g) for g in raw["gens"]],
                slack=SlackGen(**raw["slack"]) if raw.get("slack") else None,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CaseLoadFailure(f"malformed case data: {exc}") from exc
        return sys_

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        return path
