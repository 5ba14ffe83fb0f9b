"""Generate a scenario suite, run it in template-gate mode, inspect scores.

The oracle independently replays every scenario's cumulative operations
through direct backend calls, so a perfect run means two code paths
agreed on every number to 1e-4.

Run with:  python3 demos/03_benchmark_and_scoring.py
"""

import tempfile

from pfagent.bench import generate_suite, run_benchmark

suite = generate_suite(n_scenarios=16, seed=7)
print(f"suite: {len(suite.scenarios)} scenarios over the family x source grid")
example = suite.scenarios[0]
print(f"\nscenario {example.scenario_id} ({example.family}, {example.source}):")
for turn in example.turns:
    print(f"  turn {turn.turn_index} [{turn.task_type}]: {turn.prompt}")

with tempfile.TemporaryDirectory() as root:
    report = run_benchmark(suite, "template-gate", root)

print(f"\nscenario pass rate:      {report.scenario_pass_rate}")
print(f"mean conversation score: {report.mean_conversation_score}")
print(f"per-turn pass rates:     {report.per_turn_pass_rates}")
print(f"dimension averages:      { {k: round(v, 1) for k, v in report.dimension_averages.items()} }")

# The same suite under a deliberately forgetful provider: turn 3 drops
# the ledger, and the continuity dimension catches it.
with tempfile.TemporaryDirectory() as root:
    degraded = run_benchmark(suite, "mock:drop-ledger-turn3", root)
print(f"\nledger-dropping mock per-turn pass rates: {degraded.per_turn_pass_rates}")
print(f"failure histogram: {degraded.failure_category_histogram}")
