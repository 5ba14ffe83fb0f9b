"""Result-key plan: which RESULT_JSON keys a turn must report.

The plan is the shared contract between the template gate (which renders
a script that computes the values inside the sandbox) and the
verification oracle (which recomputes them through direct backend calls).
Only the key names and their derivation rules live here; the two value
computations stay independent code paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .intent import IntentMarker, ParsedObjective

PLOT_FILE_NAME = "voltage_profile.png"

MODIFICATION_MARKERS = {
    "LoadScaling", "LoadAddition", "SetpointAdjustment",
    "TargetedLoadChange", "TargetedGenChange", "LineOutage",
}
LOAD_AFFECTING = {"LoadScaling", "LoadAddition", "TargetedLoadChange"}


def fmt_num(value) -> str:
    """Canonical rendering of numeric literals in generated code and checks."""
    if isinstance(value, bool):
        return repr(value)
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


@dataclass(frozen=True)
class PlanItem:
    kind: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ResultPlan:
    items: tuple[PlanItem, ...]
    needs_base_solve: bool
    expects_plot: bool

    def has(self, kind: str) -> bool:
        return any(item.kind == kind for item in self.items)


def plan_for(markers: tuple[IntentMarker, ...] | list[IntentMarker]) -> ResultPlan:
    """Derive the result plan from one turn's markers.

    Rules: a status block (case/converged/islanded) plus a voltage summary
    appear whenever the turn runs a base power flow; evidence keys follow
    the turn's own modifications; analysis markers contribute their own
    key families. An N-1-only turn runs no base solve.
    """
    current_mods = [m for m in markers if m.marker in MODIFICATION_MARKERS]
    analysis = [m for m in markers if m.marker not in MODIFICATION_MARKERS]
    analysis_kinds = {m.marker for m in analysis}

    only_n_minus_1 = analysis_kinds == {"NMinus1"} and not current_mods
    needs_base_solve = not only_n_minus_1

    items: list[PlanItem] = []
    if needs_base_solve:
        items.append(PlanItem("status"))
        if "VoltageCheck" in analysis_kinds or not analysis_kinds - {"PlotRequest"}:
            items.append(PlanItem("voltage_summary"))
        if any(m.marker in LOAD_AFFECTING for m in current_mods):
            items.append(PlanItem("total_load"))
        for m in current_mods:
            if m.marker == "SetpointAdjustment" and m.params.get("target") == "slack":
                items.append(PlanItem("slack_voltage"))
            elif m.marker == "SetpointAdjustment" and m.params.get("target") == "pv":
                items.append(PlanItem("pv_voltage", {"bus": m.params["bus"]}))
            elif m.marker == "TargetedGenChange":
                items.append(PlanItem("slack_power"))
            elif m.marker == "LineOutage":
                items.append(PlanItem("lines_out"))

    for m in markers:
        if m.marker == "NMinus1":
            items.append(PlanItem("n_minus_1", {"scope": m.params["scope"]}))
        elif m.marker == "Ranking":
            items.append(PlanItem("ranking", {
                "quantity": m.params["quantity"],
                "order": m.params["order"],
                "top_n": m.params["top_n"],
                "threshold": m.params.get("threshold"),
            }))
        elif m.marker == "PlotRequest":
            items.append(PlanItem("plot", {"file": PLOT_FILE_NAME}))

    # Stable dedup: repeated markers of one kind collapse to the first.
    seen: set[tuple] = set()
    unique: list[PlanItem] = []
    for item in items:
        key = (item.kind, tuple(sorted(item.params.items())))
        if key not in seen:
            seen.add(key)
            unique.append(item)

    return ResultPlan(
        items=tuple(unique),
        needs_base_solve=needs_base_solve,
        expects_plot=any(i.kind == "plot" for i in unique),
    )


def plan_for_objective(objective: ParsedObjective) -> ResultPlan:
    return plan_for(objective.markers)


def plan_keys(plan: ResultPlan, converged: bool = True) -> list[str]:
    """The key names a conforming script reports for this plan.

    When the base solve fails (or islands), only the status flags remain.
    Conditional key families (N-1 worst case) are resolved by the value
    computations on both routes under the same rule.
    """
    keys: list[str] = []
    for item in plan.items:
        if item.kind == "status":
            keys += ["case", "converged", "islanded"]
            if not converged:
                return keys
        elif item.kind == "voltage_summary":
            keys += ["n_buses", "min_voltage_bus", "min_voltage_pu",
                     "max_voltage_bus", "max_voltage_pu"]
        elif item.kind == "total_load":
            keys.append("total_load_mw")
        elif item.kind == "slack_voltage":
            keys.append("slack_voltage_pu")
        elif item.kind == "pv_voltage":
            keys.append(f"bus_{item.params['bus']}_v_pu")
        elif item.kind == "slack_power":
            keys.append("slack_p_mw")
        elif item.kind == "lines_out":
            keys.append("n_lines_out")
        elif item.kind == "n_minus_1":
            keys += ["n_contingencies", "n_converged", "n_islanded"]
        elif item.kind == "ranking":
            n = item.params["top_n"]
            base = "bus" if item.params["quantity"] == "voltage" else "line"
            unit = "v_pu" if item.params["quantity"] == "voltage" else "angle_deg"
            for i in range(1, n + 1):
                keys += [f"rank_{i}_{base}", f"rank_{i}_{unit}"]
            if item.params.get("threshold") is not None:
                keys.append("n_below" if item.params["quantity"] == "voltage" else "n_above")
        elif item.kind == "plot":
            keys.append("plot_file")
    return keys
