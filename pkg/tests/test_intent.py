"""Intent parsing: classification, case source, markers, ledger algebra."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pfagent.errors import AmbiguousCase, MalformedParam
from pfagent.intent import (CaseFamily, CaseReference, MarkerVocabulary,
                            ModificationLedger, RequestKind,
                            SessionIntentState, UserTurn, advance_state,
                            classify_request, detect_case_source,
                            extract_markers, parse_turn)

VOCAB = MarkerVocabulary.load_default()


# --- classification -------------------------------------------------------


@pytest.mark.parametrize("text,expected", [
    ("Give me runnable Python code to run power flow on IEEE 14", RequestKind.RUNNABLE_CODE),
    ("Explain why the slack bus exists", RequestKind.CONCEPTUAL),
    ("run it", RequestKind.RUNNABLE_CODE),
    ("what is a PV bus", RequestKind.CONCEPTUAL),
    ("now scale the loads by 1.2", RequestKind.RUNNABLE_CODE),
    ("hello there", RequestKind.RUNNABLE_CODE),  # default branch
])
def test_classify_request(text, expected):
    assert classify_request(text, vocabulary=VOCAB) is expected


def test_debugging_requires_error_context():
    text = "why did this fail?"
    assert classify_request(text, had_error=True, vocabulary=VOCAB) is RequestKind.DEBUGGING
    assert classify_request(text, had_error=False, vocabulary=VOCAB) is RequestKind.CONCEPTUAL


def test_classify_is_total():
    # Arbitrary junk still classifies (default branch).
    for text in ("???", "12345", "the the the"):
        assert classify_request(text, vocabulary=VOCAB) in RequestKind


# --- case source -------------------------------------------------------------


def test_uploaded_exact_name_wins():
    ref = detect_case_source("run power flow on my_grid.xlsx", ["my_grid.xlsx"])
    assert ref == CaseReference("uploaded", "my_grid.xlsx", CaseFamily.OTHER)


def test_builtin_alias():
    ref = detect_case_source("use the IEEE 14 bus system", [])
    assert ref.source == "builtin"
    assert ref.identifier == "ieee14"
    assert ref.family is CaseFamily.IEEE14


def test_continuity_carry_forward():
    active = CaseReference("builtin", "ieee39", CaseFamily.IEEE39)
    assert detect_case_source("now scale the loads", [], active) == active


def test_no_case_at_all():
    assert detect_case_source("now scale the loads", []) is None


def test_ambiguous_case_is_an_error():
    with pytest.raises(AmbiguousCase):
        detect_case_source("run ieee14 or maybe my_grid.xlsx", ["my_grid.xlsx"])


def test_alias_inside_uploaded_name_not_ambiguous():
    # The file name itself contains a built-in alias; that is not a clash.
    ref = detect_case_source("run power flow on my_ieee14.json", ["my_ieee14.json"])
    assert ref.source == "uploaded"
    assert ref.family is CaseFamily.IEEE14  # family inferred from the name


# --- marker extraction ---------------------------------------------------------


def test_scaling_marker():
    markers = extract_markers("scale all loads by 1.2", VOCAB)
    assert [(m.marker, m.params) for m in markers] == [
        ("LoadScaling", {"factor": 1.2})]


def test_line_outage_by_bus_pair():
    markers = extract_markers(
        "take the line between bus 4 and bus 5 out of service", VOCAB)
    assert markers[0].marker == "LineOutage"
    assert markers[0].params == {"bus_a": 4, "bus_b": 5}


def test_malformed_param_reports_span():
    text = "scale loads by one-point-two"
    with pytest.raises(MalformedParam) as err:
        extract_markers(text, VOCAB)
    lo, hi = err.value.span
    assert text[lo:hi] == "one-point-two"


def test_extraction_is_deterministic():
    text = ("set the load at bus 9 to 40 MW, set slack voltage to 1.04 and "
            "plot the voltage profile")
    first = [m.to_dict() for m in extract_markers(text, VOCAB)]
    for _ in range(5):
        again = [m.to_dict() for m in extract_markers(text, VOCAB)]
        assert json.dumps(again, sort_keys=True) == json.dumps(first, sort_keys=True)


def test_markers_ordered_by_span():
    text = "scale all loads by 1.1 then rank the 3 lowest bus voltages"
    markers = extract_markers(text, VOCAB)
    assert [m.marker for m in markers] == ["LoadScaling", "Ranking"]
    assert markers[0].span[0] < markers[1].span[0]


def test_incomplete_marker_params():
    markers = extract_markers("set the load to 40 MW", VOCAB)
    assert markers[0].marker == "TargetedLoadChange"
    assert not markers[0].complete  # bus id missing


def test_marker_override_extends_vocabulary():
    override = {
        "marker": "LineOutage",
        "regex": r"drop the corridor (?P<bus_a>\d+)-(?P<bus_b>\d+)",
        "params": {"bus_a": "int", "bus_b": "int"},
        "set": {},
        "required": ["bus_a", "bus_b"],
    }
    assert extract_markers("drop the corridor 4-5", VOCAB) == []
    extended = VOCAB.with_overrides([override])
    markers = extract_markers("drop the corridor 4-5", extended)
    assert markers[0].marker == "LineOutage"
    assert markers[0].params == {"bus_a": 4, "bus_b": 5}


# --- parse_turn and the ledger ----------------------------------------------


def _run_turns(texts: list[str]):
    state = SessionIntentState()
    objectives = []
    for i, text in enumerate(texts, start=1):
        obj = parse_turn(UserTurn(i, text), state, VOCAB)
        objectives.append(obj)
        state = advance_state(state, obj)
    return objectives


def test_ledger_accumulates_across_turns():
    objectives = _run_turns([
        "run power flow on ieee14",
        "now scale all loads by 1.1",
    ])
    ledger = objectives[1].ledger
    assert [e.marker for e in ledger.active_entries()] == ["LoadScaling"]
    assert objectives[1].case_ref.identifier == "ieee14"


def test_explicit_override_supersedes():
    objectives = _run_turns([
        "run power flow on ieee14",
        "set slack voltage to 1.05",
        "set slack voltage to 1.02",
    ])
    ledger = objectives[2].ledger
    assert len(ledger.entries) == 2
    assert len(ledger.superseded) == 1
    active = ledger.active_entries()
    assert len(active) == 1
    assert active[0].params["v_pu"] == 1.02


def test_scaling_is_cumulative_not_superseding():
    objectives = _run_turns([
        "run power flow on ieee14",
        "scale all loads by 1.1",
        "scale all loads by 1.2",
    ])
    assert len(objectives[2].ledger.active_entries()) == 2


def test_gate_triggers_only_with_complete_params():
    complete = _run_turns(["run power flow on ieee14 and check the voltages"])[0]
    assert complete.coding_gate_triggered

    incomplete = _run_turns([
        "run power flow on ieee14",
        "set the load to 40 MW",  # no bus id
    ])[1]
    assert not incomplete.coding_gate_triggered


def test_gate_requires_request_type_code():
    obj = _run_turns(["explain why the slack bus exists"])[0]
    assert obj.request_type is RequestKind.CONCEPTUAL
    assert not obj.coding_gate_triggered


def test_case_switch_resets_ledger():
    objectives = _run_turns([
        "run power flow on ieee14",
        "scale all loads by 1.2",
        "run power flow on the pjm5 case instead",
    ])
    assert objectives[2].case_ref.identifier == "pjm5"
    assert objectives[2].ledger.active_entries() == []


def test_case_continuity_constant_without_mentions():
    objectives = _run_turns([
        "run power flow on kundur",
        "scale all loads by 1.05",
        "plot the voltage profile",
    ])
    assert all(o.case_ref.identifier == "kundur" for o in objectives)


# --- ledger property tests --------------------------------------------------

_MOD_TEXTS = [
    "scale all loads by 1.1",
    "scale all loads by 1.25",
    "set slack voltage to 1.04",
    "set slack voltage to 1.01",
    "set the load at bus 9 to 40 MW",
    "set the load at bus 9 to 55 MW",
    "set the load at bus 13 to 20 MW",
    "take the line between bus 2 and bus 4 out of service",
    "add a load of 15 MW and 5 Mvar at bus 10, then rerun the power flow",
    "plot the voltage profile",
    "rank the 3 lowest bus voltages",
]


@settings(max_examples=120, deadline=None)
@given(st.lists(st.sampled_from(_MOD_TEXTS), min_size=1, max_size=8))
def test_ledger_monotonicity(turn_texts):
    """Active entries only grow, except entries explicitly superseded."""
    state = SessionIntentState()
    first = parse_turn(UserTurn(1, "run power flow on ieee14"), state, VOCAB)
    state = advance_state(state, first)
    prev_active = set()
    for i, text in enumerate(turn_texts, start=2):
        obj = parse_turn(UserTurn(i, text), state, VOCAB)
        active = {(e.turn_index, e.marker, json.dumps(e.params, sort_keys=True))
                  for e in obj.ledger.active_entries()}
        superseded = {(e.turn_index, e.marker, json.dumps(e.params, sort_keys=True))
                      for j, e in enumerate(obj.ledger.entries)
                      if j in obj.ledger.superseded}
        # previously active entries either stay active or are now superseded
        assert prev_active <= active | superseded
        # entry count never shrinks
        assert len(obj.ledger.entries) >= len(prev_active)
        prev_active = active
        state = advance_state(state, obj)


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(_MOD_TEXTS))
def test_parse_is_pure(text):
    state = SessionIntentState()
    a = parse_turn(UserTurn(1, text), state, VOCAB)
    b = parse_turn(UserTurn(1, text), state, VOCAB)
    assert a.ledger.to_dict() == b.ledger.to_dict()
    assert [m.to_dict() for m in a.markers] == [m.to_dict() for m in b.markers]
