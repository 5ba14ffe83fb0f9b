"""Failure attribution, constraint packs, and the persistent evolution profile.

Verified benchmark failures and deployment feedback are matched against a
library of failure signatures (prompt / error / human-issue pattern
triples). Activated signatures pull their constraint packs into the
evolution profile, which the knowledge layer loads at session start; no
model retraining is involved anywhere in this loop.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from filelock import FileLock

from .errors import CorruptProfile, UnknownPack
from .knowledge import AdaptiveRuleSet

logger = logging.getLogger(__name__)

UNATTRIBUTED = "unattributed"
MAX_EXAMPLES_PER_SIGNATURE = 5


@dataclass(frozen=True)
class FailureRecord:
    origin: str  # "benchmark" | "deployment"
    prompt_text: str = ""
    error_text: str = ""
    human_issue: str = ""
    failed_dimensions: tuple[str, ...] = ()
    scenario_id: str = ""
    turn_index: int = 0

    def __post_init__(self):
        if not (self.error_text or self.human_issue or self.failed_dimensions):
            raise ValueError(
                "a failure record needs an error, a human issue, or failed dimensions"
            )

    def turn_ref(self) -> str:
        sid = self.scenario_id or self.origin
        return f"{sid}:t{self.turn_index}"


@dataclass(frozen=True)
class FailureSignature:
    signature_id: str
    prompt_patterns: tuple[str, ...] = ()
    error_patterns: tuple[str, ...] = ()
    issue_patterns: tuple[str, ...] = ()
    linked_packs: tuple[str, ...] = ()

    def __post_init__(self):
        if not (self.prompt_patterns or self.error_patterns or self.issue_patterns):
            raise ValueError("a signature needs at least one non-empty pattern set")

    def matches(self, record: FailureRecord) -> bool:
        def hit(patterns, text):
            return bool(text) and any(
                re.search(p, text, re.IGNORECASE) for p in patterns
            )

        return (hit(self.prompt_patterns, record.prompt_text)
                or hit(self.error_patterns, record.error_text)
                or hit(self.issue_patterns, record.human_issue))

    @classmethod
    def from_dict(cls, raw: dict) -> "FailureSignature":
        return cls(
            signature_id=raw["signature_id"],
            prompt_patterns=tuple(raw.get("P", [])),
            error_patterns=tuple(raw.get("E", [])),
            issue_patterns=tuple(raw.get("I", [])),
            linked_packs=tuple(raw.get("linked_packs", [])),
        )


@dataclass(frozen=True)
class ConstraintPack:
    pack_id: str
    guidance: tuple[str, ...] = ()
    pattern_overrides: tuple[dict, ...] = ()
    marker_overrides: tuple[dict, ...] = ()
    activation_count: int = 0

    def __post_init__(self):
        if not (self.guidance or self.pattern_overrides or self.marker_overrides):
            raise ValueError("a constraint pack cannot be entirely empty")

    @classmethod
    def from_dict(cls, raw: dict) -> "ConstraintPack":
        return cls(
            pack_id=raw["pack_id"],
            guidance=tuple(raw.get("guidance", [])),
            pattern_overrides=tuple(raw.get("pattern_overrides", [])),
            marker_overrides=tuple(raw.get("marker_overrides", [])),
            activation_count=int(raw.get("activation_count", 0)),
        )


def load_signature_library(path: str | Path | None = None) -> list[FailureSignature]:
    if path is None:
        raw = json.loads(
            resources.files("pfagent.data").joinpath("signatures.json").read_text("utf-8")
        )
    else:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return [FailureSignature.from_dict(entry) for entry in raw]


def load_pack_registry(path: str | Path | None = None) -> dict[str, ConstraintPack]:
    if path is None:
        raw = json.loads(
            resources.files("pfagent.data").joinpath("packs.json").read_text("utf-8")
        )
    else:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    packs = [ConstraintPack.from_dict(entry) for entry in raw]
    return {p.pack_id: p for p in packs}


# --- the profile ------------------------------------------------------------


PROFILE_FIELDS = ("version", "active_packs", "guidance", "pattern_overrides",
                  "marker_overrides", "root_cause_summary")


@dataclass(frozen=True)
class EvolutionProfile:
    version: int = 0
    active_packs: frozenset[str] = frozenset()
    guidance: tuple[str, ...] = ()
    pattern_overrides: tuple[dict, ...] = ()
    marker_overrides: tuple[dict, ...] = ()
    root_cause_summary: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "active_packs": sorted(self.active_packs),
            "guidance": list(self.guidance),
            "pattern_overrides": [dict(o) for o in self.pattern_overrides],
            "marker_overrides": [dict(o) for o in self.marker_overrides],
            "root_cause_summary": {
                sig: {"count": entry["count"], "examples": list(entry["examples"])}
                for sig, entry in sorted(self.root_cause_summary.items())
            },
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "EvolutionProfile":
        try:
            return cls(
                version=int(raw["version"]),
                active_packs=frozenset(raw["active_packs"]),
                guidance=tuple(raw["guidance"]),
                pattern_overrides=tuple(raw["pattern_overrides"]),
                marker_overrides=tuple(raw["marker_overrides"]),
                root_cause_summary={
                    sig: {"count": int(e["count"]), "examples": list(e["examples"])}
                    for sig, e in raw["root_cause_summary"].items()
                },
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptProfile(f"malformed profile: {exc}") from exc


def _dedup(seq) -> list:
    seen = set()
    out = []
    for item in seq:
        key = json.dumps(item, sort_keys=True) if isinstance(item, dict) else item
        if key not in seen:
            seen.add(key)
            out.append(item)
    return out


# --- operations ---------------------------------------------------------------


def attribute_failures(records: list[FailureRecord],
                       library: list[FailureSignature]) -> dict[str, list[FailureRecord]]:
    """Match each record against every signature (any one pattern set suffices).

    A record may activate several signatures; records matching none land in
    the ``unattributed`` bucket. Attribution is pure and deterministic.
    """
    if not library:
        raise ValueError("signature library must be non-empty")
    activations: dict[str, list[FailureRecord]] = {}
    for record in records:
        matched = False
        for signature in library:
            if signature.matches(record):
                activations.setdefault(signature.signature_id, []).append(record)
                matched = True
        if not matched:
            activations.setdefault(UNATTRIBUTED, []).append(record)
    return activations


def update_profile(profile: EvolutionProfile,
                   activations: dict[str, list[FailureRecord]],
                   library: list[FailureSignature],
                   registry: dict[str, ConstraintPack]) -> EvolutionProfile:
    """Fold activated signatures' packs into the profile; version always bumps."""
    by_id = {s.signature_id: s for s in library}
    packs = set(profile.active_packs)
    guidance = list(profile.guidance)
    pattern_overrides = list(profile.pattern_overrides)
    marker_overrides = list(profile.marker_overrides)
    summary = {sig: {"count": e["count"], "examples": list(e["examples"])}
               for sig, e in profile.root_cause_summary.items()}

    for sig_id in sorted(activations):
        if sig_id == UNATTRIBUTED or sig_id not in by_id:
            continue
        records = activations[sig_id]
        for pack_id in by_id[sig_id].linked_packs:
            if pack_id not in registry:
                raise UnknownPack(f"signature '{sig_id}' links unknown pack '{pack_id}'")
            pack = registry[pack_id]
            packs.add(pack_id)
            guidance.extend(pack.guidance)
            pattern_overrides.extend(pack.pattern_overrides)
            marker_overrides.extend(pack.marker_overrides)
        entry = summary.setdefault(sig_id, {"count": 0, "examples": []})
        entry["count"] += len(records)
        for record in records:
            ref = record.turn_ref()
            if ref not in entry["examples"] and len(entry["examples"]) < MAX_EXAMPLES_PER_SIGNATURE:
                entry["examples"].append(ref)

    return EvolutionProfile(
        version=profile.version + 1,
        active_packs=frozenset(packs),
        guidance=tuple(_dedup(guidance)),
        pattern_overrides=tuple(_dedup(pattern_overrides)),
        marker_overrides=tuple(_dedup(marker_overrides)),
        root_cause_summary=summary,
    )


def merge_profiles(a: EvolutionProfile, b: EvolutionProfile) -> EvolutionProfile:
    """Union of packs and overrides, a-first dedup of guidance, summed counts."""
    summary: dict = {}
    for source in (a.root_cause_summary, b.root_cause_summary):
        for sig, entry in source.items():
            slot = summary.setdefault(sig, {"count": 0, "examples": []})
            slot["count"] += entry["count"]
            for ref in entry["examples"]:
                if ref not in slot["examples"] and len(slot["examples"]) < MAX_EXAMPLES_PER_SIGNATURE:
                    slot["examples"].append(ref)
    return EvolutionProfile(
        version=max(a.version, b.version) + 1,
        active_packs=a.active_packs | b.active_packs,
        guidance=tuple(_dedup(list(a.guidance) + list(b.guidance))),
        pattern_overrides=tuple(_dedup(list(a.pattern_overrides) + list(b.pattern_overrides))),
        marker_overrides=tuple(_dedup(list(a.marker_overrides) + list(b.marker_overrides))),
        root_cause_summary=summary,
    )


def save_profile(profile: EvolutionProfile, path: str | Path) -> Path:
    path = Path(path)
    lock = FileLock(str(path) + ".lock")
    with lock:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(profile.to_dict(), indent=2), encoding="utf-8")
    return path


def load_profile(path: str | Path) -> EvolutionProfile:
    """Read a profile file; absent means cold start, unreadable means corrupt."""
    path = Path(path)
    if not path.exists():
        return EvolutionProfile()
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptProfile(f"cannot read profile {path.name}: {exc}") from exc
    return EvolutionProfile.from_dict(raw)


def load_active_rules(profile_or_path) -> AdaptiveRuleSet:
    """The prompt rules a new session starts with (empty on cold start).

    A corrupt profile falls back to the empty rule set with a warning;
    rules are loaded at session start only, never mid-session.
    """
    if isinstance(profile_or_path, EvolutionProfile):
        profile = profile_or_path
    else:
        try:
            profile = load_profile(profile_or_path)
        except CorruptProfile as exc:
            logger.warning("corrupt evolution profile, starting with empty rules: %s", exc)
            return AdaptiveRuleSet()
    return AdaptiveRuleSet(
        guidance=tuple(profile.guidance),
        source_packs=tuple(sorted(profile.active_packs)),
    )


def run_update_cycle(profile_path: str | Path, records: list[FailureRecord],
                     library: list[FailureSignature] | None = None,
                     registry: dict[str, ConstraintPack] | None = None,
                     ) -> tuple[EvolutionProfile, dict[str, list[FailureRecord]]]:
    """Single-writer read-modify-write of the on-disk profile."""
    library = library if library is not None else load_signature_library()
    registry = registry if registry is not None else load_pack_registry()
    profile_path = Path(profile_path)
    lock = FileLock(str(profile_path) + ".update.lock")
    with lock:
        try:
            profile = load_profile(profile_path)
        except CorruptProfile:
            logger.warning("corrupt profile at %s; starting fresh", profile_path)
            profile = EvolutionProfile()
        activations = attribute_failures(records, library)
        updated = update_profile(profile, activations, library, registry)
        save_profile(updated, profile_path)
    return updated, activations


def failure_records_from_events(events: list[dict]) -> list[FailureRecord]:
    """Harvest failure records from logged fix and feedback events."""
    records: list[FailureRecord] = []
    for event in events:
        kind = event.get("event_kind")
        payload = event.get("payload", {})
        if kind == "fix" and payload.get("final") == "BestEffort":
            records.append(FailureRecord(
                origin="deployment",
                prompt_text=payload.get("user_message", ""),
                error_text=payload.get("remaining_error", ""),
                failed_dimensions=("execution",),
                scenario_id=event.get("session_id", ""),
                turn_index=payload.get("turn_index", 0),
            ))
        elif kind == "feedback":
            records.append(FailureRecord(
                origin="deployment",
                prompt_text=payload.get("prompt_text", ""),
                error_text=payload.get("error_text", ""),
                human_issue=payload.get("issue_text", "")
                + (f" root cause: {payload['root_cause']}" if payload.get("root_cause") else ""),
                failed_dimensions=tuple(payload.get("failed_dimensions", ())) or ("feedback",),
                scenario_id=event.get("session_id", ""),
                turn_index=payload.get("turn_index", 0),
            ))
    return records
