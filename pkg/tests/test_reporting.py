"""Turn reports and the session / global event logs."""

from __future__ import annotations

import json

import pytest

from pfagent import backend
from pfagent.execution import ExecutionRecord, execute_sandboxed, template_gate
from pfagent.intent import (MarkerVocabulary, SessionIntentState, UserTurn,
                            advance_state, parse_turn)
from pfagent.reporting import (GlobalStream, SessionLog, append_event,
                               package_report)

VOCAB = MarkerVocabulary.load_default()


def _objective(*texts):
    state = SessionIntentState()
    obj = None
    for i, text in enumerate(texts, start=1):
        obj = parse_turn(UserTurn(i, text), state, VOCAB)
        state = advance_state(state, obj)
    return obj


def _record(**kwargs) -> ExecutionRecord:
    defaults = dict(exit_status=0, stdout="", stderr="", result=None,
                    plot_files=[], wall_time=0.1, workspace=".")
    defaults.update(kwargs)
    return ExecutionRecord(**defaults)


def test_success_summary_cites_result_values(tmp_path):
    objective = _objective("run power flow on ieee14 and check the voltages")
    script = template_gate(objective)
    record = execute_sandboxed(script, tmp_path)
    report = package_report(record, script, objective)
    assert "converged" in report.summary.lower()
    # every number quoted in the summary is backed by a result key
    assert f"{record.result['min_voltage_pu']:.4f}" in report.summary
    assert report.result == record.result
    assert report.code == script.code


def test_ranking_summary_names_top_bus():
    record = _record(result={"case": "ieee14", "converged": True, "islanded": False,
                             "rank_1_bus": "Bus_3", "rank_1_v_pu": 1.01})
    report = package_report(record, None, None)
    assert "Bus_3" in report.summary


def test_failure_summary_carries_error_class():
    record = _record(exit_status=1, stderr="Traceback...", error_class="NonzeroExit")
    report = package_report(record, None, None)
    assert report.summary == "Execution failed: NonzeroExit."
    assert report.fix_available


def test_empty_result_reported():
    record = _record(result={})
    report = package_report(record, None, None)
    assert "no structured output" in report.summary


def test_append_event_monotone_and_mirrored(tmp_path):
    log = SessionLog("s1", tmp_path / "session_log.json")
    stream = GlobalStream(tmp_path / "events.ndjson")
    for i in range(5):
        append_event(log, "turn", {"turn_index": i + 1}, stream)
    stamps = [(e.timestamp, e.seq) for e in log.events]
    assert stamps == sorted(stamps)
    assert [e.seq for e in log.events] == [1, 2, 3, 4, 5]

    on_disk = json.loads((tmp_path / "session_log.json").read_text())
    assert on_disk["session_id"] == "s1"
    assert len(on_disk["events"]) == 5

    lines = (tmp_path / "events.ndjson").read_text().strip().splitlines()
    assert len(lines) == 5
    assert all(json.loads(line)["session_id"] == "s1" for line in lines)


def test_unknown_event_kind_rejected(tmp_path):
    log = SessionLog("s1")
    with pytest.raises(ValueError):
        append_event(log, "bogus", {})


def test_feedback_annotation_preserved_verbatim(tmp_path):
    log = SessionLog("s1")
    note = "agent ignored my uploaded file; root cause: loader confusion"
    append_event(log, "feedback", {"issue_text": note})
    assert log.events[-1].payload["issue_text"] == note


def test_persistence_failure_keeps_session_alive(tmp_path):
    log = SessionLog("s1", tmp_path / "no_such_dir_is_a_file")
    (tmp_path / "no_such_dir_is_a_file").mkdir()  # make the path unwritable
    event = append_event(log, "turn", {"turn_index": 1})
    assert event in log.events  # still recorded in memory


def test_traceability_replay(tmp_path):
    """Re-running a report's script in a fresh workspace reproduces result."""
    objective = _objective(
        "run power flow on ieee14",
        "scale all loads by 1.15 and rerun the power flow",
    )
    script = template_gate(objective)
    first = execute_sandboxed(script, tmp_path / "a")
    report = package_report(first, script, objective)

    replay = execute_sandboxed(script, tmp_path / "b")
    assert replay.exit_status == 0
    for key, value in report.result.items():
        if isinstance(value, float):
            assert abs(replay.result[key] - value) <= 1e-4
        else:
            assert replay.result[key] == value
