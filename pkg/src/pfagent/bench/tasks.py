"""Benchmark task types: phrasings, parameter samplers, checks, oracle math.

Each task type knows how to render itself as a natural-language request,
which weighted code patterns prove grounding/continuity, how to apply its
modification through direct backend calls, and how to compute the
expected result payload. The payload computations here are the
verification oracle's route and are deliberately written independently of
the template gate's generated code.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass

from .. import backend
from ..plan import PLOT_FILE_NAME, fmt_num


def phrase_num(value) -> str:
    """Numbers as they appear in generated user prompts (no trailing .0)."""
    value = float(value)
    if value.is_integer():
        return str(int(value))
    return repr(value)


def _esc(value) -> str:
    return re.escape(fmt_num(value))


# --- case topology helpers -------------------------------------------------


def corridors(system: backend.System) -> list[tuple[int, int]]:
    pairs = {tuple(sorted((ln.bus1, ln.bus2))) for ln in system.lines}
    return sorted(pairs)


def corridor_islands(system: backend.System, pair: tuple[int, int]) -> bool:
    trial = system.copy()
    if not trial.is_setup:
        trial.setup()
    trial.line_outage_between(pair[0], pair[1])
    return backend.connected_to_slack(trial) != set(trial.bus_numbers())


def safe_corridors(system: backend.System) -> list[tuple[int, int]]:
    return [p for p in corridors(system) if not corridor_islands(system, p)]


def islanding_corridors(system: backend.System) -> list[tuple[int, int]]:
    return [p for p in corridors(system) if corridor_islands(system, p)]


def load_buses(system: backend.System) -> list[int]:
    return sorted({ld.bus for ld in system.loads})


def pv_buses(system: backend.System) -> list[int]:
    assert system.slack is not None
    return sorted({g.bus for g in system.gens} - {system.slack.bus})


# --- oracle payload building blocks ------------------------------------------


def _status(ss: backend.System, res) -> dict:
    return {"case": ss.name, "converged": res.converged, "islanded": res.islanded}


def _voltage_summary(ss: backend.System, res) -> dict:
    min_bus, min_v = res.min_voltage()
    max_bus, max_v = res.max_voltage()
    return {
        "n_buses": len(ss.buses),
        "min_voltage_bus": f"Bus_{min_bus}",
        "min_voltage_pu": min_v,
        "max_voltage_bus": f"Bus_{max_bus}",
        "max_voltage_pu": max_v,
    }


def _solved_payload(ss: backend.System, extra=None) -> dict:
    """status + voltage summary + task-specific evidence keys."""
    res = ss.run_power_flow()
    payload = _status(ss, res)
    if not res.converged:
        return payload
    payload.update(_voltage_summary(ss, res))
    if extra:
        payload.update(extra(ss, res))
    return payload


# --- task type definitions -------------------------------------------------


@dataclass(frozen=True)
class TaskType:
    name: str
    is_modification: bool
    phase: str  # "pre" | "post" | "analysis"
    expects_plot: bool = False

    # The concrete behaviors live in the registry functions below.
    def sample_params(self, rng: random.Random, system: backend.System) -> dict | None:
        return _SAMPLERS[self.name](rng, system)

    def phrasings(self, params: dict, case_phrase: str | None) -> list[str]:
        return _PHRASINGS[self.name](params, case_phrase)

    def api_checks(self, params: dict) -> list[tuple[float, str]]:
        return _API_CHECKS[self.name](params)

    def forbidden_checks(self, params: dict) -> list[tuple[float, str]]:
        return _FORBIDDEN_CHECKS.get(self.name, lambda p: [])(params)

    def apply(self, ss: backend.System, params: dict) -> None:
        fn = _APPLIERS.get(self.name)
        if fn is not None:
            fn(ss, params)

    def oracle_payload(self, ss: backend.System, params: dict) -> dict:
        return _PAYLOADS[self.name](ss, params)


# samplers ---------------------------------------------------------------------

def _sample_baseline(rng, system):
    return {}


def _sample_load_scaling(rng, system):
    return {"factor": rng.choice([0.9, 0.95, 1.05, 1.1, 1.15, 1.2])}


def _sample_load_addition(rng, system):
    return {
        "bus": rng.choice(load_buses(system)),
        "p_mw": float(rng.choice([10, 15, 20, 25, 30, 40])),
        "q_mvar": float(rng.choice([0, 5, 10, 15])),
    }


def _sample_slack_setpoint(rng, system):
    return {"v_pu": rng.choice([1.0, 1.01, 1.02, 1.03, 1.04, 1.05])}


def _sample_pv_setpoint(rng, system):
    buses = pv_buses(system)
    if not buses:
        return None
    return {"bus": rng.choice(buses), "v_pu": rng.choice([0.99, 1.0, 1.01, 1.02, 1.03])}


def _sample_targeted_load(rng, system):
    buses = load_buses(system)
    if not buses:
        return None
    bus = rng.choice(buses)
    base = sum(ld.p for ld in system.loads_at(bus)) * system.base_mva
    p = max(5.0, round(base * rng.choice([0.8, 0.9, 1.1, 1.2, 1.3])))
    return {"bus": bus, "p_mw": float(p)}


def _sample_targeted_gen(rng, system):
    buses = pv_buses(system)
    if not buses:
        return None
    bus = rng.choice(buses)
    base = sum(g.p for g in system.gens_at(bus)) * system.base_mva
    if base <= 1.0:
        p = float(rng.choice([20, 40, 60, 80]))
    else:
        p = max(5.0, round(base * rng.choice([0.8, 0.9, 1.1, 1.2])))
    return {"bus": bus, "p_mw": float(p)}


def _sample_line_outage(rng, system):
    pairs = safe_corridors(system)
    if not pairs:
        return None
    a, b = rng.choice(pairs)
    return {"bus_a": a, "bus_b": b}


def _sample_line_outage_islanding(rng, system):
    pairs = islanding_corridors(system)
    if not pairs:
        return None
    a, b = rng.choice(pairs)
    return {"bus_a": a, "bus_b": b}


def _sample_n_minus_1(rng, system):
    if rng.random() < 0.5:
        return {"scope": "all"}
    return {"scope": min(5, len(system.lines))}


def _sample_ranking_voltage(rng, system):
    threshold = rng.choice([None, 1.0, 0.99])
    return {"top_n": 3, "threshold": threshold}


def _sample_ranking_angle(rng, system):
    threshold = rng.choice([None, 5.0, 10.0])
    return {"top_n": 3, "threshold": threshold}


def _sample_plot(rng, system):
    return {}


_SAMPLERS = {
    "baseline": _sample_baseline,
    "load_scaling": _sample_load_scaling,
    "load_addition": _sample_load_addition,
    "slack_setpoint": _sample_slack_setpoint,
    "pv_setpoint": _sample_pv_setpoint,
    "targeted_load": _sample_targeted_load,
    "targeted_gen": _sample_targeted_gen,
    "line_outage": _sample_line_outage,
    "line_outage_islanding": _sample_line_outage_islanding,
    "n_minus_1": _sample_n_minus_1,
    "ranking_voltage": _sample_ranking_voltage,
    "ranking_angle": _sample_ranking_angle,
    "plot_voltage": _sample_plot,
}


# phrasings ---------------------------------------------------------------------

def _phr_baseline(p, case_phrase):
    return [
        f"Run a power flow on {case_phrase} and report the bus voltages.",
        f"Give me runnable Python code to run power flow on {case_phrase} and report the bus voltages.",
        f"Solve the base-case power flow for {case_phrase} and check the voltages.",
    ]


def _phr_load_scaling(p, _):
    f = phrase_num(p["factor"])
    return [
        f"Now scale all loads by {f} and rerun the power flow.",
        f"Scale the loads by {f} and solve again.",
        f"Multiply all loads by a factor of {f} and rerun the study.",
    ]


def _phr_load_addition(p, _):
    pm, qm, b = phrase_num(p["p_mw"]), phrase_num(p["q_mvar"]), p["bus"]
    return [
        f"Add a load of {pm} MW and {qm} Mvar at bus {b}, then rerun the power flow.",
        f"Place a new load of {pm} MW and {qm} Mvar on bus {b} and solve the case again.",
    ]


def _phr_slack_setpoint(p, _):
    v = phrase_num(p["v_pu"])
    return [
        f"Set the slack bus voltage to {v} pu and rerun the power flow.",
        f"Set the slack voltage to {v} and solve again.",
    ]


def _phr_pv_setpoint(p, _):
    v, b = phrase_num(p["v_pu"]), p["bus"]
    return [
        f"Set the PV bus voltage at bus {b} to {v} pu and rerun the power flow.",
        f"Set the generator voltage at bus {b} to {v} pu and solve the power flow again.",
    ]


def _phr_targeted_load(p, _):
    pm, b = phrase_num(p["p_mw"]), p["bus"]
    return [
        f"Set the load at bus {b} to {pm} MW and rerun the power flow.",
        f"Change the load at bus {b} to {pm} MW and solve again.",
    ]


def _phr_targeted_gen(p, _):
    pm, b = phrase_num(p["p_mw"]), p["bus"]
    return [
        f"Change the generator output at bus {b} to {pm} MW and rerun the power flow.",
        f"Set the generation at bus {b} to {pm} MW and solve the case again.",
    ]


def _phr_line_outage(p, _):
    a, b = p["bus_a"], p["bus_b"]
    return [
        f"Take the line between bus {a} and bus {b} out of service and rerun the power flow.",
        f"Remove the line between bus {a} and bus {b} and solve the power flow again.",
    ]


def _phr_n_minus_1(p, _):
    if p["scope"] == "all":
        return [
            "Run an N-1 contingency analysis over all lines.",
            "Run an N-1 contingency screen across all lines.",
        ]
    k = p["scope"]
    return [f"Run an N-1 contingency analysis over the first {k} lines."]


def _phr_ranking_voltage(p, _):
    n = p["top_n"]
    if p.get("threshold") is None:
        return [
            f"List the {n} buses with the lowest voltage.",
            f"Rank the {n} lowest bus voltages.",
        ]
    thr = phrase_num(p["threshold"])
    return [f"Rank the {n} lowest bus voltages below {thr} pu."]


def _phr_ranking_angle(p, _):
    n = p["top_n"]
    if p.get("threshold") is None:
        return [f"Rank the {n} largest line angle differences."]
    thr = phrase_num(p["threshold"])
    return [f"Rank the {n} largest line angle differences above {thr} degrees."]


def _phr_plot(p, _):
    return [
        "Plot the voltage profile.",
        "Generate a voltage-profile plot for the current case.",
        "Draw the bus voltage profile.",
    ]


_PHRASINGS = {
    "baseline": _phr_baseline,
    "load_scaling": _phr_load_scaling,
    "load_addition": _phr_load_addition,
    "slack_setpoint": _phr_slack_setpoint,
    "pv_setpoint": _phr_pv_setpoint,
    "targeted_load": _phr_targeted_load,
    "targeted_gen": _phr_targeted_gen,
    "line_outage": _phr_line_outage,
    "line_outage_islanding": _phr_line_outage,
    "n_minus_1": _phr_n_minus_1,
    "ranking_voltage": _phr_ranking_voltage,
    "ranking_angle": _phr_ranking_angle,
    "plot_voltage": _phr_plot,
}


# grounding patterns ---------------------------------------------------------------

def _api_baseline(p):
    return []


def _api_load_scaling(p):
    return [(2.0, rf"\.scale_loads\({_esc(p['factor'])}\)")]


def _api_load_addition(p):
    return [(2.0, rf"\.add_load\({p['bus']}, {_esc(p['p_mw'])}, {_esc(p['q_mvar'])}\)")]


def _api_slack_setpoint(p):
    return [(2.0, rf"\.set_slack_voltage\({_esc(p['v_pu'])}\)")]


def _api_pv_setpoint(p):
    return [
        (1.0, rf"\.gens_at\({p['bus']}\)"),
        (2.0, rf"\.set_pv_voltage\([^)]*{_esc(p['v_pu'])}\)"),
    ]


def _api_targeted_load(p):
    return [(2.0, rf"\.set_bus_load\({p['bus']}, {_esc(p['p_mw'])}\)")]


def _api_targeted_gen(p):
    return [(2.0, rf"\.set_bus_gen\({p['bus']}, {_esc(p['p_mw'])}\)")]


def _api_line_outage(p):
    return [(2.0, rf"\.line_outage_between\({p['bus_a']}, {p['bus_b']}\)")]


def _api_n_minus_1(p):
    checks = [(1.0, r"\.copy\(\)"), (2.0, r"\.line_outage\(")]
    if p["scope"] != "all":
        checks.append((1.0, rf"\[:{int(p['scope'])}\]"))
    return checks


def _api_ranking_voltage(p):
    checks = [(1.0, r"\.v_mag"), (1.0, r"sorted\(")]
    if p.get("threshold") is not None:
        checks.append((1.0, rf"< {_esc(p['threshold'])}"))
    return checks


def _api_ranking_angle(p):
    checks = [(1.0, r"\.line_angle_deg"), (1.0, r"sorted\(")]
    if p.get("threshold") is not None:
        checks.append((1.0, rf"> {_esc(p['threshold'])}"))
    return checks


def _api_plot(p):
    return [
        (2.0, rf"savefig\(\s*['\"]{PLOT_FILE_NAME}['\"]"),
        (1.0, r"plt\.subplots"),
    ]


_API_CHECKS = {
    "baseline": _api_baseline,
    "load_scaling": _api_load_scaling,
    "load_addition": _api_load_addition,
    "slack_setpoint": _api_slack_setpoint,
    "pv_setpoint": _api_pv_setpoint,
    "targeted_load": _api_targeted_load,
    "targeted_gen": _api_targeted_gen,
    "line_outage": _api_line_outage,
    "line_outage_islanding": _api_line_outage,
    "n_minus_1": _api_n_minus_1,
    "ranking_voltage": _api_ranking_voltage,
    "ranking_angle": _api_ranking_angle,
    "plot_voltage": _api_plot,
}

_FORBIDDEN_CHECKS = {
    "line_outage": lambda p: [(2.0, r"\.trip_line_by_buses\(")],
    "line_outage_islanding": lambda p: [(2.0, r"\.trip_line_by_buses\(")],
    "n_minus_1": lambda p: [(2.0, r"\.trip_line_by_buses\(")],
    "plot_voltage": lambda p: [(1.0, r"plt\.show\(")],
}


# direct modification appliers (oracle route) -----------------------------------

_APPLIERS = {
    "load_scaling": lambda ss, p: ss.scale_loads(p["factor"]),
    "load_addition": lambda ss, p: ss.add_load(p["bus"], p["p_mw"], p["q_mvar"]),
    "slack_setpoint": lambda ss, p: ss.set_slack_voltage(p["v_pu"]),
    "pv_setpoint": lambda ss, p: [
        ss.set_pv_voltage(g.idx, p["v_pu"]) for g in ss.gens_at(p["bus"])
    ],
    "targeted_load": lambda ss, p: ss.set_bus_load(p["bus"], p["p_mw"]),
    "targeted_gen": lambda ss, p: ss.set_bus_gen(p["bus"], p["p_mw"]),
    "line_outage": lambda ss, p: ss.line_outage_between(p["bus_a"], p["bus_b"]),
    "line_outage_islanding": lambda ss, p: ss.line_outage_between(p["bus_a"], p["bus_b"]),
}


# oracle payloads -----------------------------------------------------------------

def _pay_baseline(ss, p):
    return _solved_payload(ss)


def _pay_total_load(ss, p):
    return _solved_payload(ss, lambda s, r: {"total_load_mw": s.total_load_mw()})


def _pay_slack_setpoint(ss, p):
    return _solved_payload(
        ss, lambda s, r: {"slack_voltage_pu": r.v_mag[s.slack.bus]}
    )


def _pay_pv_setpoint(ss, p):
    bus = p["bus"]
    return _solved_payload(ss, lambda s, r: {f"bus_{bus}_v_pu": r.v_mag[bus]})


def _pay_targeted_gen(ss, p):
    return _solved_payload(ss, lambda s, r: {"slack_p_mw": r.slack_p_mw})


def _pay_line_outage(ss, p):
    return _solved_payload(
        ss,
        lambda s, r: {"n_lines_out": sum(1 for ln in s.lines if not ln.in_service)},
    )


def _pay_n_minus_1(ss, p):
    candidates = [ln.idx for ln in ss.lines if ln.in_service]
    if p["scope"] != "all":
        candidates = candidates[:int(p["scope"])]
    n_converged = 0
    n_islanded = 0
    worst_line = None
    worst_v = None
    for line in candidates:
        trial = ss.copy()
        trial.line_outage(line)
        res = trial.run_power_flow()
        if res.islanded:
            n_islanded += 1
            continue
        if res.converged:
            n_converged += 1
            _, v = res.min_voltage()
            if worst_v is None or v < worst_v:
                worst_line, worst_v = line, v
    payload = {
        "n_contingencies": len(candidates),
        "n_converged": n_converged,
        "n_islanded": n_islanded,
    }
    if n_converged:
        payload["worst_case_line"] = worst_line
        payload["worst_min_voltage_pu"] = worst_v
    return payload


def _pay_ranking_voltage(ss, p):
    res = ss.run_power_flow()
    payload = _status(ss, res)
    if not res.converged:
        return payload
    ranked = sorted(res.v_mag.items(), key=lambda kv: (kv[1], kv[0]))
    for i, (bus, v) in enumerate(ranked[:p["top_n"]], start=1):
        payload[f"rank_{i}_bus"] = f"Bus_{bus}"
        payload[f"rank_{i}_v_pu"] = v
    if p.get("threshold") is not None:
        payload["n_below"] = sum(1 for v in res.v_mag.values() if v < p["threshold"])
    return payload


def _pay_ranking_angle(ss, p):
    res = ss.run_power_flow()
    payload = _status(ss, res)
    if not res.converged:
        return payload
    ranked = sorted(res.line_angle_deg.items(), key=lambda kv: (-kv[1], kv[0]))
    for i, (line, ang) in enumerate(ranked[:p["top_n"]], start=1):
        payload[f"rank_{i}_line"] = line
        payload[f"rank_{i}_angle_deg"] = ang
    if p.get("threshold") is not None:
        payload["n_above"] = sum(1 for a in res.line_angle_deg.values()
                                 if a > p["threshold"])
    return payload


def _pay_plot(ss, p):
    res = ss.run_power_flow()
    payload = _status(ss, res)
    if not res.converged:
        return payload
    payload.update(_voltage_summary(ss, res))
    payload["plot_file"] = PLOT_FILE_NAME
    return payload


_PAYLOADS = {
    "baseline": _pay_baseline,
    "load_scaling": _pay_total_load,
    "load_addition": _pay_total_load,
    "slack_setpoint": _pay_slack_setpoint,
    "pv_setpoint": _pay_pv_setpoint,
    "targeted_load": _pay_total_load,
    "targeted_gen": _pay_targeted_gen,
    "line_outage": _pay_line_outage,
    "line_outage_islanding": _pay_line_outage,
    "n_minus_1": _pay_n_minus_1,
    "ranking_voltage": _pay_ranking_voltage,
    "ranking_angle": _pay_ranking_angle,
    "plot_voltage": _pay_plot,
}


TASK_TYPES: dict[str, TaskType] = {
    "baseline": TaskType("baseline", False, "analysis"),
    "load_scaling": TaskType("load_scaling", True, "post"),
    "load_addition": TaskType("load_addition", True, "pre"),
    "slack_setpoint": TaskType("slack_setpoint", True, "post"),
    "pv_setpoint": TaskType("pv_setpoint", True, "post"),
    "targeted_load": TaskType("targeted_load", True, "post"),
    "targeted_gen": TaskType("targeted_gen", True, "post"),
    "line_outage": TaskType("line_outage", True, "post"),
    "line_outage_islanding": TaskType("line_outage_islanding", True, "post"),
    "n_minus_1": TaskType("n_minus_1", False, "analysis"),
    "ranking_voltage": TaskType("ranking_voltage", False, "analysis"),
    "ranking_angle": TaskType("ranking_angle", False, "analysis"),
    "plot_voltage": TaskType("plot_voltage", False, "analysis", expects_plot=True),
}

CORE_FOLLOWUPS = (
    "load_scaling", "load_addition", "slack_setpoint", "pv_setpoint",
    "targeted_load", "targeted_gen", "line_outage", "n_minus_1",
    "ranking_voltage", "ranking_angle", "plot_voltage",
)
EXPANDED_EXTRA = ("line_outage_islanding",)
