"""Command-line interface: benchmarks, fixing, evolution updates, serving."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .bench import Suite, SuiteReport, generate_suite, run_benchmark
from .bench.runner import failure_records_from_report
from .evolution import load_profile, run_update_cycle


@click.group()
def main():
    """pfagent: interactive, self-evolving power-flow study agent."""


@main.group()
def bench():
    """Generate, run, and inspect benchmark suites."""


@bench.command("gen")
@click.option("--n", "n_scenarios", default=100, show_default=True, type=int)
@click.option("--seed", default=7, show_default=True, type=int)
@click.option("--expanded", is_flag=True, help="Include islanding-prone outage tasks.")
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def bench_gen(n_scenarios: int, seed: int, expanded: bool, out_path: str):
    """Generate a deterministic scenario suite."""
    suite = generate_suite(n_scenarios=n_scenarios, seed=seed, expanded=expanded)
    suite.save(out_path)
    click.echo(f"wrote {len(suite.scenarios)} scenarios to {out_path}")


@bench.command("run")
@click.option("--suite", "suite_path", required=True, type=click.Path(exists=True))
@click.option("--mode", default="template-gate", show_default=True)
@click.option("--report", "report_path", required=True, type=click.Path(dir_okay=False))
@click.option("--workspace-root", default="bench_workspaces", show_default=True)
@click.option("--profile", "profile_path", default=None,
              help="Evolution profile to load at session start.")
def bench_run(suite_path: str, mode: str, report_path: str,
              workspace_root: str, profile_path: str | None):
    """Run a suite through the full pipeline in the given mode."""
    suite = Suite.load(suite_path)
    profile = load_profile(profile_path) if profile_path else None
    report = run_benchmark(suite, mode, workspace_root, profile=profile)
    report.save(report_path)
    rate = report.scenario_pass_rate
    mean = report.mean_conversation_score
    click.echo(f"mode={mode} scenarios={report.n_scenarios} "
               f"pass_rate={rate if rate is None else round(rate, 2)} "
               f"mean_score={mean if mean is None else round(mean, 2)}")


@bench.command("report")
@click.option("--in", "in_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["table", "json"]),
              default="table", show_default=True)
def bench_report(in_path: str, fmt: str):
    """Pretty-print a saved benchmark report."""
    raw = json.loads(Path(in_path).read_text(encoding="utf-8"))
    if fmt == "json":
        click.echo(json.dumps(raw, indent=2))
        return
    click.echo(f"mode:                {raw['mode']}")
    click.echo(f"scenarios:           {raw['n_scenarios']}")
    click.echo(f"scenario pass rate:  {raw['scenario_pass_rate']}")
    click.echo(f"mean conversation:   {raw['mean_conversation_score']}")
    click.echo(f"per-turn pass rates: {raw['per_turn_pass_rates']}")
    click.echo(f"per-family rates:    {raw['per_family_pass_rates']}")
    click.echo(f"dimension averages:  {raw['dimension_averages']}")
    click.echo(f"failure histogram:   {raw['failure_category_histogram']}")
    if raw.get("invalid_scenarios"):
        click.echo(f"invalid scenarios:   {raw['invalid_scenarios']}")


@main.command("evolve")
@click.option("--report", "report_path", required=True, type=click.Path(exists=True),
              help="Benchmark report whose failures should be attributed.")
@click.option("--suite", "suite_path", required=True, type=click.Path(exists=True))
@click.option("--profile", "profile_path", required=True, type=click.Path(dir_okay=False))
def evolve(report_path: str, suite_path: str, profile_path: str):
    """Attribute a report's failures and update the evolution profile."""
    raw = json.loads(Path(report_path).read_text(encoding="utf-8"))
    report = SuiteReport(mode=raw["mode"])
    from .bench.runner import ScenarioResult
    from .bench.scoring import TurnScore

    for s in raw["per_scenario_scores"]:
        result = ScenarioResult(s["scenario_id"], s["family"], s["source"])
        for t in s["turns"]:
            result.turns.append(TurnScore(
                s_fmt=t["s_fmt"], s_gnd=t["s_gnd"], s_cont=t["s_cont"],
                s_exec=t["s_exec"], s_sem=t["s_sem"], s_art=t["s_art"],
                artifact_applicable=t["artifact_applicable"],
                failure_categories=list(t["failure_categories"]),
            ))
        report.per_scenario_scores.append(result)

    suite = Suite.load(suite_path)
    records = failure_records_from_report(report, suite)
    profile, activations = run_update_cycle(profile_path, records)
    activated = sorted(k for k in activations if k != "unattributed")
    click.echo(f"records={len(records)} activated={activated} "
               f"profile_version={profile.version} packs={sorted(profile.active_packs)}")


@main.command("fix")
@click.option("--session", "session_id", required=True)
@click.option("--turn", default=None, type=int)
@click.option("--workspace-root", default="workspace", show_default=True)
def fix(session_id: str, turn: int | None, workspace_root: str):
    """Repair the failing script of a recorded session turn.

    Loads the stored session log, rebuilds the fix request from the
    failing turn, and runs the repair loop with the offline repairer.
    """
    from .execution import GeneratedScript
    from .fixer import (DemoRepairProvider, FixRequest, index_repository,
                        repair_loop)

    log_path = Path(workspace_root) / session_id / "session_log.json"
    if not log_path.exists():
        click.echo(f"no session log at {log_path}", err=True)
        sys.exit(1)
    log = json.loads(log_path.read_text(encoding="utf-8"))
    executions = [e for e in log["events"] if e["event_kind"] == "execution"
                  and e["payload"].get("exit_status") != 0]
    if turn is not None:
        executions = [e for e in executions if e["payload"].get("turn_index") == turn]
    if not executions:
        click.echo("nothing to fix: no failed execution on record", err=True)
        sys.exit(1)
    failed = executions[-1]["payload"]
    turn_index = failed.get("turn_index", 0)
    generations = [e for e in log["events"] if e["event_kind"] == "generation"
                   and e["payload"].get("turn_index") == turn_index]
    turns = [e for e in log["events"] if e["event_kind"] == "turn"
             and e["payload"].get("turn_index") == turn_index]
    if not generations:
        click.echo("no generated code recorded for that turn", err=True)
        sys.exit(1)

    workspace = Path(workspace_root) / session_id
    request = FixRequest(
        user_message=turns[-1]["payload"].get("text", "(unknown)") if turns else "(unknown)",
        agent_response="",
        failing_code=generations[-1]["payload"]["code"],
        output_and_errors=(failed.get("stdout", "") + "\n" + failed.get("stderr", "")).strip(),
        workspace_files=tuple(sorted(p.name for p in workspace.iterdir() if p.is_file())),
        case_identifier_and_config=f"session={session_id}; turn={turn_index}",
    )
    outcome = repair_loop(request, DemoRepairProvider(),
                          index_repository(Path.cwd()), workspace=workspace)
    click.echo(f"{outcome.final} after {outcome.iterations_used} iteration(s); "
               f"validated={outcome.validated_locally}")


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8010, show_default=True, type=int)
@click.option("--root", default="workspace", show_default=True)
@click.option("--mode", default="template-gate", show_default=True)
def serve(host: str, port: int, root: str, mode: str):
    """Start the HTTP service (and the UI if frontend/dist exists)."""
    from .service import main as service_main

    service_main(host=host, port=port, root=root, mode=mode)


if __name__ == "__main__":
    main()
