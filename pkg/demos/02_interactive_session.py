"""A three-turn study session through the full agent pipeline.

Each turn goes: intent parsing -> prompt assembly -> template gate ->
static checks -> sandboxed execution -> packaged report. Earlier
modifications persist across turns via the modification ledger.

Run with:  python3 demos/02_interactive_session.py
"""

import tempfile

from pfagent.session import AgentConfig, KnowledgeAssets, Session

assets = KnowledgeAssets.load()

with tempfile.TemporaryDirectory() as workspace:
    session = Session("demo-session", workspace, AgentConfig(), assets=assets)

    turns = [
        "Run a power flow on the IEEE 14 bus system and report the bus voltages.",
        "Now scale all loads by 1.2 and rerun the power flow.",
        "Rank the 3 lowest bus voltages below 1.05 pu.",
    ]
    for text in turns:
        outcome = session.handle_turn(text)
        print(f"\nuser: {text}")
        print(f"agent: {outcome.report.summary}")
        active = outcome.objective.ledger.active_entries()
        print(f"  ledger: {[(e.turn_index, e.marker) for e in active]}")
        print(f"  result: {outcome.record.result}")

    log_kinds = [e.event_kind for e in session.log.events]
    print(f"\nsession log events: {log_kinds}")
