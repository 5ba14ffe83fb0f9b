"""Repository retrieval, fix-prompt assembly, and the repair loop."""

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pfagent.errors import ProviderError
from pfagent.evolution import load_signature_library
from pfagent.fixer import (DemoRepairProvider, FixRequest, RepoChunk,
                           ScriptedRepairProvider, assemble_fix_prompt,
                           chunk_text, extract_prompt_section,
                           extract_signal_terms, index_repository,
                           record_fix_event, repair_loop)
from pfagent.reporting import SessionLog

LIBRARY = load_signature_library()

GOOD_CODE = (
    "import json\n"
    "from pfagent import backend\n"
    'ss = backend.get_case("ieee14")\n'
    "ss.setup()\n"
    "res = ss.run_power_flow()\n"
    'print("RESULT_JSON: " + json.dumps({"converged": res.converged}))\n'
)
BAD_CODE = GOOD_CODE.replace(
    'print("RESULT_JSON',
    'raise RuntimeError("seeded fault")\nprint("RESULT_JSON')


def _request(**kwargs) -> FixRequest:
    defaults = dict(
        user_message="run power flow on ieee14",
        agent_response="",
        failing_code=BAD_CODE,
        output_and_errors="Traceback (most recent call last):\nRuntimeError: seeded fault",
        workspace_files=("my_case.json",),
        case_identifier_and_config="case=builtin:ieee14; mode=mock",
    )
    defaults.update(kwargs)
    return FixRequest(**defaults)


# --- chunking ----------------------------------------------------------------


def test_chunk_arithmetic_from_spec():
    text = "x" * 2500
    assert chunk_text(text, 1000, 200) == [(0, 1000), (800, 1800), (1600, 2500)]


def test_chunks_reconstruct_file():
    text = "".join(chr(97 + i % 26) for i in range(3777))
    spans = chunk_text(text, 500, 120)
    rebuilt = text[:0]
    last_end = 0
    for lo, hi in spans:
        rebuilt += text[max(lo, last_end):hi]
        last_end = hi
    assert rebuilt == text


def test_binary_files_skipped(tmp_path):
    (tmp_path / "normal.py").write_text("def fn():\n    return 'SENTINEL_TOKEN'\n")
    (tmp_path / "image.png").write_bytes(b"\x89PNG\x00\x00binary")
    index = index_repository(tmp_path)
    assert all(chunk.path != "image.png" for chunk in index.chunks)


def test_sentinel_plant_and_query(tmp_path):
    (tmp_path / "a.py").write_text("nothing interesting here\n" * 20)
    fixture = tmp_path / "tests"
    fixture.mkdir()
    (fixture / "fixture.py").write_text(
        "def helper():\n    return 'XYLOPHONE_QUARTZ_token'\n")
    index = index_repository(tmp_path)
    hits = index.query(["XYLOPHONE_QUARTZ_token"], k=3)
    assert hits
    assert hits[0].path == "tests/fixture.py"


# --- signal terms -----------------------------------------------------------------


def test_terms_prioritize_error_side():
    error = 'KeyError: "Line_4_5"\nsomething about run_power_flow'
    code = "ss.line_outage('Line_1')\nss.scale_loads(1.2)"
    terms = extract_signal_terms(error, code)
    assert "KeyError" in terms
    assert "Line_4_5" in terms
    assert terms.index("Line_4_5") < terms.index("scale_loads")


def test_terms_from_code_only():
    terms = extract_signal_terms("", "ss.set_bus_load(9, 40.0)")
    assert "set_bus_load" in terms


def test_stopword_only_error_yields_code_terms():
    terms = extract_signal_terms("the of and is", "ss.scale_loads(1.2)")
    assert "scale_loads" in terms
    assert "the" not in terms


# --- fix prompt --------------------------------------------------------------------


def test_fix_prompt_contains_six_sources_in_order():
    prompt = assemble_fix_prompt(_request(), [])
    titles = ["USER MESSAGE", "AGENT RESPONSE", "FAILING CODE",
              "OUTPUT AND ERRORS", "WORKSPACE FILES", "CASE AND CONFIGURATION"]
    positions = [prompt.index(f"[{t}]") for t in titles]
    assert positions == sorted(positions)


def test_failing_code_embedded_byte_identical():
    request = _request()
    prompt = assemble_fix_prompt(request, [])
    assert extract_prompt_section(prompt, "FAILING CODE") == request.failing_code


def test_repo_items_cited_and_truncated_lowest_rank_first():
    chunks = [RepoChunk(f"src/file{i}.py", 0, "y" * 4000, 200) for i in range(9)]
    prompt = assemble_fix_prompt(_request(), chunks, budget=14_000)
    assert "[REPOSITORY src/file0.py#0]" in prompt
    assert "[REPOSITORY src/file8.py#0]" not in prompt
    # the six sources survive any truncation
    assert "[CASE AND CONFIGURATION]" in prompt


def test_zero_repo_items_ok():
    prompt = assemble_fix_prompt(_request(), [])
    assert "[REPOSITORY" not in prompt


# --- repair loop --------------------------------------------------------------------


def _fenced(code: str) -> str:
    return f"```python\n{code}\n```"


def test_fixed_at_iteration_two(tmp_path):
    provider = ScriptedRepairProvider([_fenced(BAD_CODE), _fenced(GOOD_CODE)])
    outcome = repair_loop(_request(), provider, workspace=tmp_path, retry_limit=3)
    assert outcome.final == "Fixed"
    assert outcome.iterations_used == 2
    assert outcome.validated_locally
    assert outcome.attempts[-1].succeeded


def test_best_effort_at_limit(tmp_path):
    provider = ScriptedRepairProvider([_fenced(BAD_CODE)])
    outcome = repair_loop(_request(), provider, workspace=tmp_path, retry_limit=2)
    assert outcome.final == "BestEffort"
    assert outcome.iterations_used == 2
    assert "seeded fault" in outcome.last_error()


def test_error_replaces_old_one_between_iterations(tmp_path):
    prompts = []

    class SpyProvider:
        def __init__(self):
            self.calls = 0

        def repair(self, prompt):
            prompts.append(prompt)
            self.calls += 1
            bad = GOOD_CODE.replace(
                "res = ss.run_power_flow()",
                f'raise ValueError("fault mark {self.calls}")')
            return _fenced(bad)

    repair_loop(_request(), SpyProvider(), workspace=tmp_path, retry_limit=3)
    assert "seeded fault" in prompts[0]
    assert "fault mark 1" in prompts[1] and "seeded fault" not in prompts[1]
    assert "fault mark 2" in prompts[2] and "fault mark 1" not in prompts[2]


def test_validation_disabled_single_best_effort(tmp_path):
    provider = ScriptedRepairProvider([_fenced(GOOD_CODE)])
    outcome = repair_loop(_request(), provider, workspace=tmp_path,
                          validate_locally=False, retry_limit=5)
    assert outcome.final == "BestEffort"
    assert outcome.iterations_used == 1
    assert not outcome.validated_locally
    assert outcome.attempts[0].validation is None


def test_provider_error_aborts_best_effort(tmp_path):
    class FailingProvider:
        def repair(self, prompt):
            raise ProviderError("no network")

    outcome = repair_loop(_request(), FailingProvider(), workspace=tmp_path)
    assert outcome.final == "BestEffort"
    assert outcome.iterations_used == 0


def test_demo_repair_provider_strips_seeded_raise(tmp_path):
    outcome = repair_loop(_request(), DemoRepairProvider(), workspace=tmp_path)
    assert outcome.final == "Fixed"
    assert outcome.iterations_used == 1


@settings(max_examples=60, deadline=None)
@given(st.integers(min_value=1, max_value=4),
       st.integers(min_value=0, max_value=6))
def test_loop_bound_property(tmp_path_factory, retry_limit, fix_at):
    """iterations_used never exceeds retry_limit, whatever the mock does."""
    ws = tmp_path_factory.mktemp("fixws")
    responses = [_fenced(BAD_CODE)] * fix_at + [_fenced(GOOD_CODE)]
    outcome = repair_loop(_request(), ScriptedRepairProvider(responses),
                          workspace=ws, retry_limit=retry_limit)
    assert outcome.iterations_used <= retry_limit
    if fix_at < retry_limit:
        assert outcome.final == "Fixed"
        assert outcome.iterations_used == fix_at + 1
    else:
        assert outcome.final == "BestEffort"


# --- recording ---------------------------------------------------------------------


def test_fixed_outcome_appends_note(tmp_path):
    provider = ScriptedRepairProvider([_fenced(GOOD_CODE)])
    outcome = repair_loop(_request(), provider, workspace=tmp_path)
    log = SessionLog("s1")
    queued = record_fix_event(outcome, log, LIBRARY, _request(), turn_index=2)
    assert queued == []
    event = log.events[-1]
    assert event.event_kind == "fix"
    assert "fixed in 1 iteration(s)" in event.payload["note"]
    assert "local validation passed" in event.payload["note"]


def test_best_effort_queues_matching_packs(tmp_path):
    bad = GOOD_CODE.replace("res = ss.run_power_flow()",
                            'ss.trip_line_by_buses(4, 99)\nres = None')
    provider = ScriptedRepairProvider([_fenced(bad)])
    outcome = repair_loop(_request(), provider, workspace=tmp_path, retry_limit=1)
    assert outcome.final == "BestEffort"
    log = SessionLog("s1")
    queued = record_fix_event(outcome, log, LIBRARY, _request(), turn_index=2)
    assert "line_outage_api_pack" in queued
    assert log.events[-1].payload["queued_packs"] == queued


def test_best_effort_matching_nothing(tmp_path):
    # a timeout leaves no traceback, so no error signature can match
    from pfagent.execution import SandboxLimits

    provider = ScriptedRepairProvider([_fenced("while True:\n    pass")])
    outcome = repair_loop(_request(), provider, workspace=tmp_path, retry_limit=1,
                          limits=SandboxLimits(wall_time=1.0))
    assert outcome.final == "BestEffort"
    log = SessionLog("s1")
    queued = record_fix_event(outcome, log, LIBRARY, _request(), turn_index=2)
    assert queued == []
    assert log.events[-1].event_kind == "fix"
