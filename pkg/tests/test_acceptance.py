"""Acceptance criteria, one test per criterion, one PASS/FAIL line each.

The heavyweight shared artifact is a full TemplateGate benchmark run over
the seeded 100-scenario suite; several criteria read it. Filesystem
snapshots around that run back the confinement criterion.
"""

from __future__ import annotations

import itertools
import json
import random
import time
from pathlib import Path

import pytest

from pfagent import backend
from pfagent.bench import (SemanticKeySpec, Suite, WeightedCheck,
                           failure_records_from_report, generate_suite,
                           run_benchmark, semantic_score, verify_expected,
                           weighted_pattern_score)
from pfagent.bench.scoring import values_match
from pfagent.evolution import (EvolutionProfile, attribute_failures,
                               load_pack_registry, load_profile,
                               load_signature_library, merge_profiles,
                               run_update_cycle, save_profile, update_profile)
from pfagent.fixer import (FixRequest, ScriptedRepairProvider,
                           assemble_fix_prompt, extract_prompt_section,
                           repair_loop)
from pfagent.knowledge import build_manual_index, retrieve_windows

SUITE_SEED = 7
SUITE_SIZE = 100

_SNAPSHOT_EXCLUDE = ("__pycache__", ".pytest_cache", ".hypothesis", ".git")


def _criterion(name: str, ok: bool, detail: str = ""):
    line = f"{'PASS' if ok else 'FAIL'} - {name}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


def _tree_snapshot(roots: list[Path]) -> set[str]:
    files: set[str] = set()
    for root in roots:
        if not root.exists():
            continue
        for p in root.rglob("*"):
            if any(part in _SNAPSHOT_EXCLUDE for part in p.parts):
                continue
            if p.is_file():
                files.add(str(p))
    return files


@pytest.fixture(scope="session")
def gate_run(tmp_path_factory):
    """One full TemplateGate benchmark over the seeded 100-scenario suite."""
    suite = generate_suite(n_scenarios=SUITE_SIZE, seed=SUITE_SEED)
    workspace_root = tmp_path_factory.mktemp("gate_bench")
    monitored = [Path.cwd(), Path.home() / ".config",
                 Path.home() / ".cache" / "matplotlib"]
    before = _tree_snapshot(monitored)
    started = time.monotonic()
    report = run_benchmark(suite, "template-gate", workspace_root,
                           keep_transcripts=True)
    elapsed = time.monotonic() - started
    after = _tree_snapshot(monitored)
    return {
        "suite": suite,
        "report": report,
        "elapsed": elapsed,
        "outside_new_files": sorted(after - before),
        "workspace_root": workspace_root,
    }


def test_deterministic_perfect_run(gate_run):
    report = gate_run["report"]
    ok = (report.n_scenarios == SUITE_SIZE
          and not report.invalid_scenarios
          and report.scenario_pass_rate == 100.0
          and report.mean_conversation_score == 100.0
          and gate_run["elapsed"] < 1800.0)
    _criterion(
        "deterministic perfect run (template gate, 100 scenarios)",
        ok,
        f"pass_rate={report.scenario_pass_rate} "
        f"mean={report.mean_conversation_score} "
        f"elapsed={gate_run['elapsed']:.1f}s",
    )


def test_scoring_arithmetic_worked_examples():
    checks = [WeightedCheck(2.0, "alpha"), WeightedCheck(1.0, "bravo"),
              WeightedCheck(2.0, "charlie")]
    partial = weighted_pattern_score("alpha charlie", checks, 25.0)
    full = weighted_pattern_score("alpha bravo charlie", checks, 25.0)
    scaled = weighted_pattern_score("alpha bravo charlie", checks, 15.0)
    penalty = weighted_pattern_score(
        "alpha bravo charlie delta",
        checks + [WeightedCheck(2.0, "delta", kind="forbidden")], 25.0)

    sem_34 = semantic_score({"a": 1.0, "b": 99.0, "c": "x", "d": 7},
                            SemanticKeySpec({"a": 1.0, "b": 2.0, "c": "x", "d": 7}))
    sem_miss = semantic_score({"a": 1.0, "b": 2.0},
                              SemanticKeySpec({"a": 1.0, "b": 2.0,
                                               "c": 3.0, "d": 4.0}))
    boundary_in = semantic_score({"v": 1.0 + 1e-4}, SemanticKeySpec({"v": 1.0}))
    boundary_out = semantic_score({"v": 1.0 + 1.0001e-4}, SemanticKeySpec({"v": 1.0}))

    ok = (abs(partial - 20.0) < 1e-9
          and abs(full - 25.0) < 1e-9
          and abs(scaled - 15.0) < 1e-9
          and abs(penalty - 15.0) < 1e-9
          and abs(sem_34 - 18.75) < 1e-9
          and abs(sem_miss - 12.5) < 1e-9
          and abs(boundary_in - 25.0) < 1e-9
          and boundary_out == 0.0)
    _criterion("scoring arithmetic reproduces the worked examples to 1e-9", ok)


def test_evaluator_oracle_self_consistency(gate_run):
    report = gate_run["report"]
    bad = [
        (s.scenario_id, i + 1, turn.percentage)
        for s in report.per_scenario_scores
        for i, turn in enumerate(s.turns)
        if turn.percentage != 100.0 or not turn.passed
    ]
    _criterion(
        "evaluator/oracle self-consistency (canonical transcripts all score 100)",
        not bad, f"exceptions={bad[:5]}",
    )


def test_gate_oracle_agreement(gate_run):
    report = gate_run["report"]
    mismatches = []
    for scenario in report.per_scenario_scores:
        for i, transcript in enumerate(scenario.transcripts):
            result = transcript["result"] or {}
            expected = transcript["expected"]
            if set(result) != set(expected):
                mismatches.append((scenario.scenario_id, i + 1, "keys"))
                continue
            for key, want in expected.items():
                if not values_match(result[key], want):
                    mismatches.append((scenario.scenario_id, i + 1, key))
    _criterion(
        "gate/oracle agreement within 1e-4 on all suite turns",
        not mismatches, f"mismatches={mismatches[:5]}",
    )


def test_continuity_degradation_reproduction(tmp_path_factory):
    suite = generate_suite(n_scenarios=16, seed=11)
    workspace_root = tmp_path_factory.mktemp("continuity_bench")
    report = run_benchmark(suite, "mock:drop-ledger-turn3", workspace_root)
    rates = report.per_turn_pass_rates
    turn3_failures = [t for s in report.per_scenario_scores
                      for t in s.turns[2:] if not t.passed]
    ok = (rates is not None
          and rates["1"] > rates["3"]
          and bool(turn3_failures)
          and all("continuity" in t.failure_categories for t in turn3_failures))
    _criterion(
        "continuity degradation reproduction (scripted ledger-dropping mock)",
        ok, f"turn rates={rates}",
    )


def test_evolution_recovery_reproduction(tmp_path_factory):
    suite = generate_suite(n_scenarios=16, seed=11)
    root = tmp_path_factory.mktemp("evolution_bench")
    profile_path = root / "evolution_profile.json"

    pre = run_benchmark(suite, "mock:outage-api-misuse", root / "pre")
    pre_rate = pre.scenario_pass_rate
    outage_turn_failures = [
        t for s in pre.per_scenario_scores for t in s.turns if not t.passed
    ]
    grounding_failures = all("grounding" in t.failure_categories
                             for t in outage_turn_failures
                             if "continuity" not in t.failure_categories)

    records = failure_records_from_report(pre, suite)
    updated, activations = run_update_cycle(profile_path, records)

    post = run_benchmark(suite, "mock:outage-api-misuse", root / "post",
                         profile=updated)
    ok = (pre_rate is not None and pre_rate < 100.0
          and bool(outage_turn_failures)
          and grounding_failures
          and "line_outage_api_guardrail" in activations
          and post.scenario_pass_rate == 100.0
          and post.mean_conversation_score == 100.0)
    _criterion(
        "evolution recovery (attribution + profile update, same provider)",
        ok, f"pre={pre_rate} post={post.scenario_pass_rate} "
            f"activated={sorted(k for k in activations if k != 'unattributed')}",
    )


def test_profile_algebra_properties(tmp_path):
    rng = random.Random(20260809)
    library = load_signature_library()
    registry = load_pack_registry()
    prompts = ["remove the line between bus 4 and bus 5",
               "take the corridor 7-8 out", "scale all loads by 1.2"]

    def random_profile() -> EvolutionProfile:
        return EvolutionProfile(
            version=rng.randrange(10),
            active_packs=frozenset(rng.sample(
                [f"pack{i}" for i in range(8)], rng.randrange(0, 6))),
            guidance=tuple(dict.fromkeys(
                rng.choices([f"rule {i}" for i in range(10)],
                            k=rng.randrange(0, 8)))),
            root_cause_summary={
                f"sig{i}": {"count": rng.randrange(40), "examples": []}
                for i in range(rng.randrange(0, 5))
            },
        )

    checked = 0
    for _ in range(250):  # merge commutativity on packs and counts
        a, b = random_profile(), random_profile()
        ab, ba = merge_profiles(a, b), merge_profiles(b, a)
        assert ab.active_packs == ba.active_packs
        assert ({k: v["count"] for k, v in ab.root_cause_summary.items()}
                == {k: v["count"] for k, v in ba.root_cause_summary.items()})
        checked += 1
    for _ in range(250):  # guidance dedup
        merged = merge_profiles(random_profile(), random_profile())
        assert len(merged.guidance) == len(set(merged.guidance))
        checked += 1
    for _ in range(250):  # update monotonicity of active_packs
        profile = random_profile()
        from pfagent.evolution import FailureRecord
        records = [FailureRecord(origin="benchmark", prompt_text=p,
                                 failed_dimensions=("grounding",))
                   for p in rng.choices(prompts, k=rng.randrange(0, 4))]
        activations = attribute_failures(records, library) if records else {}
        updated = update_profile(profile, activations, library, registry)
        assert profile.active_packs <= updated.active_packs
        checked += 1
    for i in range(250):  # save/load round trip
        profile = random_profile()
        path = tmp_path / f"p{i % 4}.json"
        save_profile(profile, path)
        assert load_profile(path).to_dict() == profile.to_dict()
        checked += 1
    _criterion("profile algebra property sweep (>= 1000 random cases)",
               checked >= 1000, f"cases={checked}")


def test_fix_loop_bounds(tmp_path):
    good = ("import json\nfrom pfagent import backend\n"
            'ss = backend.get_case("ieee14")\nss.setup()\n'
            "res = ss.run_power_flow()\n"
            'print("RESULT_JSON: " + json.dumps({"converged": res.converged}))\n')
    bad = good.replace('print("RESULT_JSON',
                       'raise RuntimeError("still broken")\nprint("RESULT_JSON')
    request = FixRequest(
        user_message="run power flow on ieee14",
        agent_response="",
        failing_code=bad,
        output_and_errors="RuntimeError: still broken",
        workspace_files=(),
        case_identifier_and_config="case=builtin:ieee14",
    )

    ok = True
    # Fixed at iteration n for every n <= limit
    for fix_at in (1, 2, 3):
        responses = [f"```python\n{bad}\n```"] * (fix_at - 1) + [f"```python\n{good}\n```"]
        outcome = repair_loop(request, ScriptedRepairProvider(responses),
                              workspace=tmp_path / f"fixed{fix_at}", retry_limit=3)
        ok &= outcome.final == "Fixed" and outcome.iterations_used == fix_at

    # BestEffort exactly at the limit
    stubborn = ScriptedRepairProvider([f"```python\n{bad}\n```"])
    outcome = repair_loop(request, stubborn, workspace=tmp_path / "stubborn",
                          retry_limit=2)
    ok &= outcome.final == "BestEffort" and outcome.iterations_used == 2

    # bound sweep: iterations_used <= retry_limit for every combination
    for limit, fix_at in itertools.product((1, 2, 3), (0, 1, 2, 3, 4)):
        responses = [f"```python\n{bad}\n```"] * fix_at + [f"```python\n{good}\n```"]
        outcome = repair_loop(request, ScriptedRepairProvider(responses),
                              workspace=tmp_path / f"b{limit}{fix_at}",
                              retry_limit=limit)
        ok &= outcome.iterations_used <= limit

    # failing code embedded byte-identically in the fix prompt
    prompt = assemble_fix_prompt(request, [])
    ok &= extract_prompt_section(prompt, "FAILING CODE") == bad

    _criterion("fix loop bounds and context fidelity", ok)


def test_sandbox_confinement(gate_run):
    leaked = gate_run["outside_new_files"]
    _criterion(
        "sandbox confinement (no files created outside workspaces)",
        not leaked, f"leaked={leaked[:5]}",
    )


def test_retrieval_sanity():
    sentinel = "the cryptic heliotrope calibration shim aligns the feeder"
    pages = [f"page {i} filler content" for i in range(1, 9)]
    pages[5] = pages[5] + ". " + sentinel
    index = build_manual_index(pages, window_pages=2, overlap_pages=1)
    top = retrieve_windows(index, f"where does {sentinel} happen", k=3)
    lo, hi = top[0].page_range
    rank1 = lo <= 6 <= hi

    ten = build_manual_index([f"p{i}" for i in range(1, 11)], 3, 1)
    arithmetic = [w.page_range for w in ten.windows] == [
        (1, 3), (3, 5), (5, 7), (7, 9), (9, 10)]
    single = [w.page_range for w in build_manual_index(["only"], 3, 1).windows] == [(1, 1)]
    oversize = [w.page_range for w in build_manual_index(
        ["a", "b"], 5, 2).windows] == [(1, 2)]

    _criterion("retrieval sanity (sentinel rank 1, window arithmetic edges)",
               rank1 and arithmetic and single and oversize)
