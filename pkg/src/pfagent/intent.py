"""Turn classification, case-source resolution, and intent-marker extraction.

Markers and request detectors are anchored regular expressions stored as
data (``data/markers.json``), so evolution-profile overrides can extend
the vocabulary without code changes. Parsing is deterministic: the same
(text, vocabulary) always yields the same marker list.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from importlib import resources

from .errors import AmbiguousCase, MalformedParam

_FLOAT_RE = re.compile(r"^[+-]?(?:\d+\.?\d*|\.\d+)$")


class RequestKind(str, Enum):
    RUNNABLE_CODE = "RunnableCode"
    CONCEPTUAL = "ConceptualExplanation"
    DEBUGGING = "DebuggingInsight"


class CaseFamily(str, Enum):
    IEEE14 = "IEEE14"
    IEEE39 = "IEEE39"
    KUNDUR = "Kundur"
    PJM5 = "PJM5"
    OTHER = "Other"


@dataclass(frozen=True)
class UserTurn:
    turn_index: int
    text: str
    attached_files: tuple[str, ...] = ()
    timestamp: str = ""

    def __post_init__(self):
        if self.turn_index < 1:
            raise ValueError("turn_index must be positive")
        if not self.text:
            raise ValueError("turn text must be non-empty")
        if not self.timestamp:
            object.__setattr__(
                self, "timestamp", datetime.now(timezone.utc).isoformat()
            )


@dataclass(frozen=True)
class CaseReference:
    source: str  # "builtin" | "uploaded"
    identifier: str
    family: CaseFamily = CaseFamily.OTHER

    def to_dict(self) -> dict:
        return {"source": self.source, "identifier": self.identifier,
                "family": self.family.value}

    @classmethod
    def from_dict(cls, raw: dict) -> "CaseReference":
        return cls(source=raw["source"], identifier=raw["identifier"],
                   family=CaseFamily(raw.get("family", "Other")))


@dataclass(frozen=True)
class IntentMarker:
    marker: str
    span: tuple[int, int]
    params: dict
    complete: bool

    def to_dict(self) -> dict:
        return {"marker": self.marker, "span": list(self.span),
                "params": dict(sorted(self.params.items())), "complete": self.complete}


@dataclass(frozen=True)
class LedgerEntry:
    turn_index: int
    marker: str
    params: dict

    def to_dict(self) -> dict:
        return {"turn_index": self.turn_index, "marker": self.marker,
                "params": dict(sorted(self.params.items()))}


@dataclass(frozen=True)
class ModificationLedger:
    entries: tuple[LedgerEntry, ...] = ()
    superseded: frozenset[int] = frozenset()

    def active_entries(self) -> list[LedgerEntry]:
        return [e for i, e in enumerate(self.entries) if i not in self.superseded]

    def to_dict(self) -> dict:
        return {"entries": [e.to_dict() for e in self.entries],
                "superseded": sorted(self.superseded)}

    def serialize(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class ParsedObjective:
    request_type: RequestKind
    case_ref: CaseReference | None
    markers: tuple[IntentMarker, ...]
    ledger: ModificationLedger
    coding_gate_triggered: bool
    turn_index: int = 1

    def analysis_markers(self, vocabulary: "MarkerVocabulary") -> list[IntentMarker]:
        return [m for m in self.markers
                if not vocabulary.markers[m.marker].modification]


# --- vocabulary ------------------------------------------------------------


@dataclass(frozen=True)
class PatternSpec:
    regex: str
    params: dict
    set_params: dict
    required: tuple[str, ...]
    compiled: re.Pattern = field(repr=False, compare=False, default=None)

    @classmethod
    def from_dict(cls, raw: dict) -> "PatternSpec":
        return cls(
            regex=raw["regex"],
            params=dict(raw.get("params", {})),
            set_params=dict(raw.get("set", {})),
            required=tuple(raw.get("required", [])),
            compiled=re.compile(raw["regex"], re.IGNORECASE),
        )


@dataclass(frozen=True)
class MarkerSpec:
    name: str
    schema: tuple[str, ...]
    modification: bool
    patterns: tuple[PatternSpec, ...]


class MarkerVocabulary:
    """The versioned marker vocabulary plus request-type detectors."""

    def __init__(self, version: int, markers: dict[str, MarkerSpec],
                 detectors: dict[str, list[re.Pattern]]):
        self.version = version
        self.markers = markers
        self.detectors = detectors

    @classmethod
    def from_dict(cls, raw: dict) -> "MarkerVocabulary":
        markers = {}
        for spec in raw["markers"]:
            markers[spec["marker"]] = MarkerSpec(
                name=spec["marker"],
                schema=tuple(spec.get("schema", [])),
                modification=bool(spec.get("modification", False)),
                patterns=tuple(PatternSpec.from_dict(p) for p in spec["patterns"]),
            )
        detectors = {
            kind: [re.compile(rx, re.IGNORECASE) for rx in patterns]
            for kind, patterns in raw.get("request_detectors", {}).items()
        }
        return cls(raw.get("version", 0), markers, detectors)

    @classmethod
    def load_default(cls) -> "MarkerVocabulary":
        raw = json.loads(
            resources.files("pfagent.data").joinpath("markers.json").read_text("utf-8")
        )
        return cls.from_dict(raw)

    def with_overrides(self, marker_overrides: list[dict],
                       pattern_overrides: list[dict] | None = None) -> "MarkerVocabulary":
        """New vocabulary with evolution-profile overrides appended."""
        markers = dict(self.markers)
        for ov in marker_overrides:
            name = ov["marker"]
            if name not in markers:
                continue  # overrides may only extend known markers
            spec = markers[name]
            markers[name] = MarkerSpec(
                name=spec.name, schema=spec.schema, modification=spec.modification,
                patterns=spec.patterns + (PatternSpec.from_dict(ov),),
            )
        detectors = {k: list(v) for k, v in self.detectors.items()}
        for ov in pattern_overrides or []:
            if ov.get("kind") != "request":
                continue
            bucket = {"RunnableCode": "code", "ConceptualExplanation": "conceptual",
                      "DebuggingInsight": "debug"}.get(ov.get("request_type", ""), None)
            if bucket:
                detectors.setdefault(bucket, []).append(
                    re.compile(ov["regex"], re.IGNORECASE))
        return MarkerVocabulary(self.version, markers, detectors)


_ALIASES = None


def _case_aliases() -> dict:
    global _ALIASES
    if _ALIASES is None:
        raw = json.loads(
            resources.files("pfagent.data").joinpath("case_aliases.json").read_text("utf-8")
        )
        _ALIASES = {
            name: {
                "family": CaseFamily(entry["family"]),
                "patterns": [re.compile(p, re.IGNORECASE) for p in entry["patterns"]],
            }
            for name, entry in raw["cases"].items()
        }
    return _ALIASES


# --- operations -------------------------------------------------------------


def classify_request(text: str, *, had_error: bool = False,
                     vocabulary: MarkerVocabulary | None = None) -> RequestKind:
    """Pick exactly one request kind; total function, defaults to code."""
    vocab = vocabulary or MarkerVocabulary.load_default()
    if had_error and any(p.search(text) for p in vocab.detectors.get("debug", [])):
        return RequestKind.DEBUGGING
    if any(p.search(text) for p in vocab.detectors.get("code", [])):
        return RequestKind.RUNNABLE_CODE
    if any(p.search(text) for p in vocab.detectors.get("conceptual", [])):
        return RequestKind.CONCEPTUAL
    return RequestKind.RUNNABLE_CODE


def detect_case_source(text: str, workspace_files: list[str],
                       active_case: CaseReference | None = None) -> CaseReference | None:
    """Resolve which case this turn is about.

    Exact uploaded-file mentions win; then built-in aliases; otherwise the
    active case carries forward. Mixing an upload with a different built-in
    alias in one turn is an error, never a guess.
    """
    uploaded: str | None = None
    masked = text
    for fname in sorted(workspace_files):
        pos = text.find(fname)
        if pos >= 0:
            if uploaded is None:
                uploaded = fname
            # Mask the mention so an alias inside a file name does not
            # double-count as a built-in reference.
            masked = masked.replace(fname, " " * len(fname))

    builtin: str | None = None
    builtin_pos = len(masked) + 1
    for name, entry in _case_aliases().items():
        for pat in entry["patterns"]:
            m = pat.search(masked)
            if m and m.start() < builtin_pos:
                builtin = name
                builtin_pos = m.start()

    if uploaded and builtin:
        raise AmbiguousCase(
            f"turn mentions both the uploaded file '{uploaded}' and the "
            f"built-in case '{builtin}'; please say which one to use"
        )
    if uploaded:
        family = CaseFamily.OTHER
        lowered = uploaded.lower()
        for name, entry in _case_aliases().items():
            if name in lowered or any(p.search(uploaded) for p in entry["patterns"]):
                family = entry["family"]
                break
        return CaseReference(source="uploaded", identifier=uploaded, family=family)
    if builtin:
        return CaseReference(source="builtin", identifier=builtin,
                             family=_case_aliases()[builtin]["family"])
    return active_case


def _parse_param(kind: str, token: str, span: tuple[int, int]):
    cleaned = token.strip().strip(".,;:!?").removesuffix("pu").removesuffix("p.u")
    cleaned = cleaned.strip().rstrip("%")
    if kind in ("float", "percent_up", "percent_down"):
        if not _FLOAT_RE.match(cleaned):
            raise MalformedParam(f"cannot parse number from '{token}'", span)
        value = float(cleaned)
        if kind == "percent_up":
            return 1.0 + value / 100.0
        if kind == "percent_down":
            return 1.0 - value / 100.0
        return value
    if kind == "int":
        if not re.match(r"^[+-]?\d+$", cleaned):
            raise MalformedParam(f"cannot parse integer from '{token}'", span)
        return int(cleaned)
    raise ValueError(f"unknown param kind '{kind}'")


def extract_markers(text: str, vocabulary: MarkerVocabulary) -> list[IntentMarker]:
    """Match the vocabulary against a turn; longest match first, then leftmost."""
    candidates = []
    for order, (name, spec) in enumerate(sorted(vocabulary.markers.items())):
        for p_order, pattern in enumerate(spec.patterns):
            for m in pattern.compiled.finditer(text):
                candidates.append(
                    (m.start() - m.end(), m.start(), order, p_order, name, pattern, m)
                )
    # longest (most negative start-end) first, then earliest, then stable ids
    candidates.sort(key=lambda c: (c[0], c[1], c[2], c[3]))

    accepted: list[tuple[str, PatternSpec, re.Match]] = []
    taken: list[tuple[int, int]] = []
    for _, start, _, _, name, pattern, m in candidates:
        end = m.end()
        if any(s < end and start < e for s, e in taken):
            continue
        taken.append((start, end))
        accepted.append((name, pattern, m))

    accepted.sort(key=lambda item: item[2].start())
    markers = []
    for name, pattern, m in accepted:
        params = dict(pattern.set_params)
        for group, kind in pattern.params.items():
            token = m.groupdict().get(group)
            if token is None:
                continue
            params[group] = _parse_param(kind, token, m.span(group))
        complete = all(k in params for k in pattern.required)
        markers.append(IntentMarker(marker=name, span=m.span(),
                                    params=params, complete=complete))
    return markers


_SUPERSESSION_KEYS = {
    "SetpointAdjustment": lambda p: ("setpoint", p.get("target"), p.get("bus")),
    "TargetedLoadChange": lambda p: ("busload", p.get("bus")),
    "TargetedGenChange": lambda p: ("busgen", p.get("bus")),
    "LineOutage": lambda p: ("outage", frozenset((p.get("bus_a"), p.get("bus_b")))),
}


def supersession_key(marker: str, params: dict):
    fn = _SUPERSESSION_KEYS.get(marker)
    return fn(params) if fn else None


@dataclass
class SessionIntentState:
    """The slice of session state the parser needs between turns."""

    active_case: CaseReference | None = None
    ledger: ModificationLedger = field(default_factory=ModificationLedger)
    workspace_files: list[str] = field(default_factory=list)
    had_error: bool = False


def parse_turn(turn: UserTurn, state: SessionIntentState,
               vocabulary: MarkerVocabulary | None = None) -> ParsedObjective:
    """Build the structured objective for one turn and advance the ledger."""
    vocab = vocabulary or MarkerVocabulary.load_default()
    request_type = classify_request(turn.text, had_error=state.had_error,
                                    vocabulary=vocab)
    files = list(state.workspace_files) + list(turn.attached_files)
    case_ref = detect_case_source(turn.text, files, state.active_case)

    markers = tuple(extract_markers(turn.text, vocab))

    ledger = state.ledger
    if (case_ref is not None and state.active_case is not None
            and case_ref != state.active_case):
        # A different case starts a fresh study; old edits do not carry over.
        ledger = ModificationLedger()

    entries = list(ledger.entries)
    superseded = set(ledger.superseded)
    if request_type is RequestKind.RUNNABLE_CODE:
        for marker in markers:
            if not vocab.markers[marker.marker].modification or not marker.complete:
                continue
            key = supersession_key(marker.marker, marker.params)
            if key is not None:
                for i, old in enumerate(entries):
                    if i in superseded:
                        continue
                    if supersession_key(old.marker, old.params) == key:
                        superseded.add(i)
            entries.append(LedgerEntry(turn_index=turn.turn_index,
                                       marker=marker.marker,
                                       params=dict(marker.params)))
    new_ledger = ModificationLedger(entries=tuple(entries),
                                    superseded=frozenset(superseded))

    gate = (
        request_type is RequestKind.RUNNABLE_CODE
        and case_ref is not None
        and all(m.complete for m in markers)
    )
    return ParsedObjective(
        request_type=request_type,
        case_ref=case_ref,
        markers=markers,
        ledger=new_ledger,
        coding_gate_triggered=gate,
        turn_index=turn.turn_index,
    )


def advance_state(state: SessionIntentState, objective: ParsedObjective) -> SessionIntentState:
    """Session state after a parsed turn (parser-visible slice only)."""
    return SessionIntentState(
        active_case=objective.case_ref or state.active_case,
        ledger=objective.ledger,
        workspace_files=list(state.workspace_files),
        had_error=state.had_error,
    )
