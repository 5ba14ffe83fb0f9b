"""Deterministic template gate: fully specified objectives skip the model.

The gate renders a study script straight from the parsed objective: load
the case with the correct source call, replay the surviving modification
ledger in turn order (structural additions before setup), run the solver,
and print the structured result for the turn's plan. Identical objectives
render byte-identical scripts.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import GateUnsupported
from ..intent import LedgerEntry, ParsedObjective
from ..plan import PlanItem, ResultPlan, fmt_num, plan_for_objective


@dataclass(frozen=True)
class GeneratedScript:
    code: str
    fenced_block_count: int
    provenance: str  # "Model" | "Template" | "Repair"
    attempt_index: int
    appended_result_stmt: bool = False
    raw_block_count: int = 1


def render_modification(entry: LedgerEntry) -> list[str]:
    p = entry.params
    if entry.marker == "LoadAddition":
        q = p.get("q_mvar", 0.0)
        return [f"ss.add_load({p['bus']}, {fmt_num(p['p_mw'])}, {fmt_num(q)})"]
    if entry.marker == "LoadScaling":
        return [f"ss.scale_loads({fmt_num(p['factor'])})"]
    if entry.marker == "SetpointAdjustment":
        if p.get("target") == "slack":
            return [f"ss.set_slack_voltage({fmt_num(p['v_pu'])})"]
        return [
            f"for g in ss.gens_at({p['bus']}):",
            f"    ss.set_pv_voltage(g.idx, {fmt_num(p['v_pu'])})",
        ]
    if entry.marker == "TargetedLoadChange":
        return [f"ss.set_bus_load({p['bus']}, {fmt_num(p['p_mw'])})"]
    if entry.marker == "TargetedGenChange":
        return [f"ss.set_bus_gen({p['bus']}, {fmt_num(p['p_mw'])})"]
    if entry.marker == "LineOutage":
        return [f"ss.line_outage_between({p['bus_a']}, {p['bus_b']})"]
    raise GateUnsupported(f"no template for modification marker '{entry.marker}'")


def _render_base_items(plan: ResultPlan) -> list[str]:
    """Payload lines that run under the `if res.converged:` guard."""
    lines: list[str] = []
    for item in plan.items:
        if item.kind == "voltage_summary":
            lines += [
                "min_bus, min_v = res.min_voltage()",
                "max_bus, max_v = res.max_voltage()",
                'payload["n_buses"] = len(ss.buses)',
                'payload["min_voltage_bus"] = f"Bus_{min_bus}"',
                'payload["min_voltage_pu"] = min_v',
                'payload["max_voltage_bus"] = f"Bus_{max_bus}"',
                'payload["max_voltage_pu"] = max_v',
            ]
        elif item.kind == "total_load":
            lines.append('payload["total_load_mw"] = ss.total_load_mw()')
        elif item.kind == "slack_voltage":
            lines.append('payload["slack_voltage_pu"] = res.v_mag[ss.slack.bus]')
        elif item.kind == "pv_voltage":
            bus = item.params["bus"]
            lines.append(f'payload["bus_{bus}_v_pu"] = res.v_mag[{bus}]')
        elif item.kind == "slack_power":
            lines.append('payload["slack_p_mw"] = res.slack_p_mw')
        elif item.kind == "lines_out":
            lines.append(
                'payload["n_lines_out"] = sum(1 for ln in ss.lines if not ln.in_service)'
            )
        elif item.kind == "ranking":
            lines += _render_ranking(item)
        elif item.kind == "plot":
            lines += _render_plot(item)
    return lines


def _render_ranking(item: PlanItem) -> list[str]:
    n = item.params["top_n"]
    threshold = item.params.get("threshold")
    if item.params["quantity"] == "voltage":
        key = ("lambda kv: (kv[1], kv[0])" if item.params["order"] == "lowest"
               else "lambda kv: (-kv[1], kv[0])")
        lines = [
            f"ranked = sorted(res.v_mag.items(), key={key})",
            f"for i, (bus, v) in enumerate(ranked[:{n}], start=1):",
            '    payload[f"rank_{i}_bus"] = f"Bus_{bus}"',
            '    payload[f"rank_{i}_v_pu"] = v',
        ]
        if threshold is not None:
            lines.append(
                f'payload["n_below"] = sum(1 for v in res.v_mag.values() if v < {fmt_num(threshold)})'
            )
        return lines
    key = ("lambda kv: (-kv[1], kv[0])" if item.params["order"] == "highest"
           else "lambda kv: (kv[1], kv[0])")
    lines = [
        f"ranked = sorted(res.line_angle_deg.items(), key={key})",
        f"for i, (line, ang) in enumerate(ranked[:{n}], start=1):",
        '    payload[f"rank_{i}_line"] = line',
        '    payload[f"rank_{i}_angle_deg"] = ang',
    ]
    if threshold is not None:
        lines.append(
            f'payload["n_above"] = sum(1 for a in res.line_angle_deg.values() if a > {fmt_num(threshold)})'
        )
    return lines


def _render_plot(item: PlanItem) -> list[str]:
    fname = item.params["file"]
    return [
        "buses = sorted(res.v_mag)",
        "fig, ax = plt.subplots(figsize=(7, 3.5))",
        'ax.plot(buses, [res.v_mag[b] for b in buses], marker="o")',
        'ax.set_xlabel("bus number")',
        'ax.set_ylabel("voltage [pu]")',
        'ax.set_title(f"Voltage profile: {ss.name}")',
        "fig.tight_layout()",
        f'fig.savefig("{fname}", dpi=120)',
        f'payload["plot_file"] = "{fname}"',
    ]


def _render_n_minus_1(item: PlanItem) -> list[str]:
    scope = item.params["scope"]
    candidates = "[ln.idx for ln in ss.lines if ln.in_service]"
    if scope != "all":
        candidates += f"[:{int(scope)}]"
    return [
        f"candidates = {candidates}",
        "n_converged = 0",
        "n_islanded = 0",
        "worst_line = None",
        "worst_v = None",
        "for line in candidates:",
        "    trial = ss.copy()",
        "    trial.line_outage(line)",
        "    cres = trial.run_power_flow()",
        "    if cres.islanded:",
        "        n_islanded += 1",
        "        continue",
        "    if cres.converged:",
        "        n_converged += 1",
        "        _, v = cres.min_voltage()",
        "        if worst_v is None or v < worst_v:",
        "            worst_line, worst_v = line, v",
        'payload["n_contingencies"] = len(candidates)',
        'payload["n_converged"] = n_converged',
        'payload["n_islanded"] = n_islanded',
        "if n_converged:",
        '    payload["worst_case_line"] = worst_line',
        '    payload["worst_min_voltage_pu"] = worst_v',
    ]


def template_gate(objective: ParsedObjective) -> GeneratedScript:
    """Render the deterministic study script for a fully specified objective."""
    if not objective.coding_gate_triggered:
        raise GateUnsupported("objective did not trigger the coding gate")
    if objective.case_ref is None:
        raise GateUnsupported("objective has no resolved case reference")
    plan = plan_for_objective(objective)

    lines: list[str] = ["import json"]
    if plan.expects_plot:
        lines.append("import matplotlib.pyplot as plt")
    lines += ["from pfagent import backend", ""]

    if objective.case_ref.source == "builtin":
        lines.append(f'ss = backend.get_case("{objective.case_ref.identifier}")')
    else:
        lines.append(f'ss = backend.load("{objective.case_ref.identifier}")')

    active = objective.ledger.active_entries()
    for entry in active:
        if entry.marker == "LoadAddition":
            lines += render_modification(entry)
    lines.append("ss.setup()")
    for entry in active:
        if entry.marker != "LoadAddition":
            lines += render_modification(entry)

    lines.append("payload = {}")
    if plan.needs_base_solve:
        lines += [
            "res = ss.run_power_flow()",
            'payload["case"] = ss.name',
            'payload["converged"] = res.converged',
            'payload["islanded"] = res.islanded',
        ]
        base_items = _render_base_items(plan)
        if base_items:
            lines.append("if res.converged:")
            lines += [f"    {line}" for line in base_items]
    for item in plan.items:
        if item.kind == "n_minus_1":
            lines += _render_n_minus_1(item)

    lines.append('print("RESULT_JSON: " + json.dumps(payload))')
    code = "\n".join(lines) + "\n"
    return GeneratedScript(code=code, fenced_block_count=1,
                           provenance="Template", attempt_index=1)


def gate_response_text(script: GeneratedScript) -> str:
    """The chat-visible response wrapping a gate script (one fenced block)."""
    return "Here is the study script:\n\n```python\n" + script.code.rstrip("\n") + "\n```"
