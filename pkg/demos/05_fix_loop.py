"""The in-session repair loop on a seeded runtime failure.

A mock provider injects a raise into an otherwise correct study script;
the repair loop assembles the six-source fix prompt plus repository
context, calls the repair provider, validates locally, and records the
outcome into the same event pipeline the self-evolution mechanism reads.

Run with:  python3 demos/05_fix_loop.py
"""

import tempfile

from pfagent.execution import make_mock_provider
from pfagent.session import AgentConfig, KnowledgeAssets, Session

assets = KnowledgeAssets.load()
config = AgentConfig(mode="mock:demo-failure", gate_enabled=False)

with tempfile.TemporaryDirectory() as workspace:
    session = Session("fix-demo", workspace, config,
                      provider=make_mock_provider("demo-failure"), assets=assets)

    outcome = session.handle_turn(
        "Run a demo failure power flow on ieee14 and check the voltages")
    print(f"turn summary: {outcome.report.summary}")
    print(f"stderr tail:  {outcome.record.stderr.strip().splitlines()[-1]}")

    from pfagent.fixer import DemoRepairProvider

    session.repair_provider = DemoRepairProvider()
    fix = session.run_fix()
    print(f"\nfix outcome:  {fix.final} after {fix.iterations_used} iteration(s), "
          f"validated={fix.validated_locally}")
    print(f"fix note:     {session.log.events[-1].payload['note']}")
