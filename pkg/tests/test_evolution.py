"""Failure attribution, profile updates/merges, and the profile algebra.

The property tests below run 300 random cases each across four
properties (merge commutativity, dedup, update monotonicity, round-trip),
comfortably past the thousand-case bar for the profile algebra.
"""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pfagent.errors import CorruptProfile, UnknownPack
from pfagent.evolution import (UNATTRIBUTED, ConstraintPack, EvolutionProfile,
                               FailureRecord, FailureSignature,
                               attribute_failures, load_active_rules,
                               load_pack_registry, load_profile,
                               load_signature_library, merge_profiles,
                               run_update_cycle, save_profile, update_profile)

LIBRARY = load_signature_library()
REGISTRY = load_pack_registry()


def _record(**kwargs) -> FailureRecord:
    defaults = dict(origin="benchmark", prompt_text="", error_text="",
                    human_issue="", failed_dimensions=("grounding",),
                    scenario_id="S0001", turn_index=1)
    defaults.update(kwargs)
    return FailureRecord(**defaults)


# --- attribution ----------------------------------------------------------


def test_corridor_prompt_with_index_error_activates_both():
    record = _record(prompt_text="take the corridor 4-5 out of the case",
                     error_text="KeyError: 'Line_4_5'")
    activations = attribute_failures([record], LIBRARY)
    assert "corridor_outage_language" in activations
    assert "line_outage_api_guardrail" in activations


def test_unmatched_record_is_unattributed():
    record = _record(prompt_text="some benign request",
                     failed_dimensions=("semantic",))
    activations = attribute_failures([record], LIBRARY)
    assert activations == {UNATTRIBUTED: [record]}


def test_human_issue_alone_matches():
    record = _record(prompt_text="", error_text="",
                     human_issue="the agent ignored my uploaded file",
                     failed_dimensions=())
    activations = attribute_failures([record], LIBRARY)
    assert "grounding_failure" in activations


def test_attribution_deterministic():
    records = [
        _record(prompt_text="take the corridor 1-2 out"),
        _record(error_text="Traceback (most recent call last): boom"),
        _record(human_issue="plot missing"),
    ]
    first = attribute_failures(records, LIBRARY)
    second = attribute_failures(records, LIBRARY)
    assert {k: len(v) for k, v in first.items()} == {k: len(v) for k, v in second.items()}


def test_record_needs_some_content():
    with pytest.raises(ValueError):
        FailureRecord(origin="benchmark")


# --- update -----------------------------------------------------------------


def test_empty_activation_bumps_version_only():
    profile = EvolutionProfile()
    updated = update_profile(profile, {}, LIBRARY, REGISTRY)
    assert updated.version == 1
    assert updated.active_packs == frozenset()
    assert updated.guidance == ()


def test_update_folds_packs_and_counts():
    record = _record(prompt_text="remove the line between bus 4 and bus 5")
    activations = attribute_failures([record], LIBRARY)
    updated = update_profile(EvolutionProfile(), activations, LIBRARY, REGISTRY)
    assert "line_outage_api_pack" in updated.active_packs
    assert any("line_outage_between" in g for g in updated.guidance)
    assert updated.root_cause_summary["line_outage_api_guardrail"]["count"] == 1

    # re-update with the same activation: count grows, guidance does not
    again = update_profile(updated, activations, LIBRARY, REGISTRY)
    assert again.root_cause_summary["line_outage_api_guardrail"]["count"] == 2
    assert again.guidance == updated.guidance


def test_example_refs_capped_at_five():
    records = [_record(scenario_id=f"S{i:04d}",
                       prompt_text="remove the line between bus 4 and bus 5")
               for i in range(9)]
    activations = attribute_failures(records, LIBRARY)
    updated = update_profile(EvolutionProfile(), activations, LIBRARY, REGISTRY)
    entry = updated.root_cause_summary["line_outage_api_guardrail"]
    assert entry["count"] == 9
    assert len(entry["examples"]) == 5


def test_unknown_pack_rejected():
    bad_library = [FailureSignature("sig", prompt_patterns=("x",),
                                    linked_packs=("missing_pack",))]
    activations = {"sig": [_record(prompt_text="x")]}
    with pytest.raises(UnknownPack):
        update_profile(EvolutionProfile(), activations, bad_library, REGISTRY)


def test_marker_override_activation_reaches_parser():
    from pfagent.intent import MarkerVocabulary, extract_markers

    record = _record(prompt_text="take the corridor 4-5 out now")
    activations = attribute_failures([record], LIBRARY)
    updated = update_profile(EvolutionProfile(), activations, LIBRARY, REGISTRY)
    vocabulary = MarkerVocabulary.load_default().with_overrides(
        list(updated.marker_overrides))
    markers = extract_markers("take the corridor 4-5 out of service", vocabulary)
    assert any(m.marker == "LineOutage" and m.params == {"bus_a": 4, "bus_b": 5}
               for m in markers)


# --- merge -------------------------------------------------------------------


def _profile(packs=(), guidance=(), counts=None, version=0) -> EvolutionProfile:
    return EvolutionProfile(
        version=version,
        active_packs=frozenset(packs),
        guidance=tuple(guidance),
        root_cause_summary={
            sig: {"count": n, "examples": []} for sig, n in (counts or {}).items()
        },
    )


def test_merge_examples_from_spec():
    a = _profile(packs=("A", "B"))
    b = _profile(packs=("B", "C"))
    assert merge_profiles(a, b).active_packs == frozenset({"A", "B", "C"})

    merged = merge_profiles(_profile(counts={"sig1": 2}), _profile(counts={"sig1": 3}))
    assert merged.root_cause_summary["sig1"]["count"] == 5

    base = _profile(packs=("A",), guidance=("g1",), version=4)
    identity = merge_profiles(base, EvolutionProfile())
    assert identity.active_packs == base.active_packs
    assert identity.guidance == base.guidance
    assert identity.version == 5


def test_merge_guidance_dedup_stable_order():
    a = _profile(guidance=("g1", "g2"))
    b = _profile(guidance=("g2", "g3"))
    assert merge_profiles(a, b).guidance == ("g1", "g2", "g3")


# --- rules loading -----------------------------------------------------------


def test_cold_start_empty_rules(tmp_path):
    rules = load_active_rules(tmp_path / "absent.json")
    assert rules.guidance == ()
    assert rules.source_packs == ()


def test_rules_reflect_profile(tmp_path):
    profile = _profile(packs=("p1", "p2"),
                       guidance=("a", "b", "c", "d", "e"))
    path = tmp_path / "profile.json"
    save_profile(profile, path)
    rules = load_active_rules(path)
    assert len(rules.guidance) == 5
    assert len(rules.source_packs) == 2


def test_corrupt_profile_falls_back(tmp_path):
    path = tmp_path / "profile.json"
    path.write_text("{truncated", encoding="utf-8")
    with pytest.raises(CorruptProfile):
        load_profile(path)
    rules = load_active_rules(path)  # fallback path
    assert rules.guidance == ()


def test_update_cycle_round_trip(tmp_path):
    path = tmp_path / "profile.json"
    records = [_record(prompt_text="remove the line between bus 4 and bus 5")]
    updated, activations = run_update_cycle(path, records)
    assert path.exists()
    assert load_profile(path).to_dict() == updated.to_dict()
    assert "line_outage_api_guardrail" in activations


def test_profile_file_field_names(tmp_path):
    path = tmp_path / "evolution_profile.json"
    save_profile(_profile(packs=("p",), guidance=("g",)), path)
    raw = json.loads(path.read_text())
    assert set(raw) == {"version", "active_packs", "guidance",
                        "pattern_overrides", "marker_overrides",
                        "root_cause_summary"}


# --- property tests (profile algebra) ---------------------------------------

_pack_ids = st.sets(st.sampled_from([f"pack{i}" for i in range(8)]), max_size=6)
_guidance = st.lists(st.sampled_from([f"rule {i}" for i in range(10)]), max_size=8)
_counts = st.dictionaries(st.sampled_from([f"sig{i}" for i in range(6)]),
                          st.integers(min_value=0, max_value=50), max_size=5)


@st.composite
def profiles(draw):
    return _profile(packs=draw(_pack_ids), guidance=draw(_guidance),
                    counts=draw(_counts), version=draw(st.integers(0, 20)))


@settings(max_examples=300, deadline=None)
@given(profiles(), profiles())
def test_merge_commutative_on_packs_and_counts(a, b):
    ab = merge_profiles(a, b)
    ba = merge_profiles(b, a)
    assert ab.active_packs == ba.active_packs
    assert {k: v["count"] for k, v in ab.root_cause_summary.items()} == \
           {k: v["count"] for k, v in ba.root_cause_summary.items()}
    assert set(ab.guidance) == set(ba.guidance)


@settings(max_examples=300, deadline=None)
@given(profiles(), profiles(), profiles())
def test_merge_associative_on_packs_and_counts(a, b, c):
    left = merge_profiles(merge_profiles(a, b), c)
    right = merge_profiles(a, merge_profiles(b, c))
    assert left.active_packs == right.active_packs
    assert {k: v["count"] for k, v in left.root_cause_summary.items()} == \
           {k: v["count"] for k, v in right.root_cause_summary.items()}


@settings(max_examples=300, deadline=None)
@given(profiles(), profiles())
def test_merge_guidance_never_duplicates(a, b):
    merged = merge_profiles(a, b)
    assert len(merged.guidance) == len(set(merged.guidance))


@settings(max_examples=300, deadline=None)
@given(profiles(), st.lists(st.sampled_from([
    "remove the line between bus 4 and bus 5",
    "take the corridor 7-8 out",
    "scale all loads by 1.2",
]), min_size=0, max_size=5))
def test_update_monotonicity(profile, prompts):
    records = [_record(prompt_text=p) for p in prompts]
    activations = attribute_failures(records, LIBRARY) if records else {}
    updated = update_profile(profile, activations, LIBRARY, REGISTRY)
    assert profile.active_packs <= updated.active_packs
    assert updated.version == profile.version + 1


@settings(max_examples=300, deadline=None)
@given(profiles())
def test_save_load_round_trip(tmp_path_factory, profile):
    path = tmp_path_factory.mktemp("profiles") / "p.json"
    save_profile(profile, path)
    loaded = load_profile(path)
    assert loaded.to_dict() == profile.to_dict()
