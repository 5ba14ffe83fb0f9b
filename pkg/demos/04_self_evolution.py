"""Failure attribution and constraint-pack recovery, no model change.

A scripted provider misuses the line-outage API (executes fine, wrong
call form), failing the grounding dimension. Attribution matches the
failure signatures, activates the guardrail pack, and the rerun with the
updated profile passes -- the provider itself never changes.

Run with:  python3 demos/04_self_evolution.py
"""

import tempfile
from pathlib import Path

from pfagent.bench import failure_records_from_report, generate_suite, run_benchmark
from pfagent.evolution import run_update_cycle

suite = generate_suite(n_scenarios=16, seed=11)

with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    pre = run_benchmark(suite, "mock:outage-api-misuse", tmp / "pre")
    print(f"pre-evolution:  pass rate {pre.scenario_pass_rate}%, "
          f"failures {pre.failure_category_histogram}")

    records = failure_records_from_report(pre, suite)
    profile, activations = run_update_cycle(tmp / "evolution_profile.json", records)
    activated = sorted(k for k in activations if k != "unattributed")
    print(f"attribution:    {len(records)} records -> signatures {activated}")
    print(f"profile v{profile.version}: packs {sorted(profile.active_packs)}")
    for guidance in profile.guidance:
        print(f"  rule: {guidance}")

    post = run_benchmark(suite, "mock:outage-api-misuse", tmp / "post",
                         profile=profile)
    print(f"post-evolution: pass rate {post.scenario_pass_rate}%, "
          f"mean score {post.mean_conversation_score}")
