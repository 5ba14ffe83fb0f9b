"""Retrieval layer: manual windows, code examples, case inventory, rules.

Four knowledge sources are combined into one system prompt. Sections are
fenced by bit-exact sentinel markers so the evaluator and the logs can
audit exactly what context a generation saw:

    <<RULES>> <<MANUAL>> <<EXAMPLES>> <<CASE_INVENTORY>> <<CONTINUITY>> <<COMPACTION>>

The embedder is injectable; the default is a hashed bag-of-words cosine
so the whole system runs deterministically with no model downloads.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import backend
from .errors import BudgetExhausted, EmptyManual
from .intent import CaseReference, ParsedObjective

logger = logging.getLogger(__name__)

SECTION_SENTINELS = ("<<RULES>>", "<<MANUAL>>", "<<EXAMPLES>>",
                     "<<CASE_INVENTORY>>", "<<CONTINUITY>>", "<<COMPACTION>>")

DEFAULT_PROMPT_BUDGET = 12_000


class HashedBagOfWordsEmbedder:
    """Deterministic fallback embedder: md5-hashed token counts, L2-normalized."""

    def __init__(self, dim: int = 512):
        self.dim = dim

    def __call__(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for token in re.findall(r"[a-z0-9_]+", text.lower()):
            digest = hashlib.md5(token.encode("utf-8")).digest()
            vec[int.from_bytes(digest[:8], "big") % self.dim] += 1.0
        norm = float(np.linalg.norm(vec))
        return vec / norm if norm > 0 else vec


@dataclass(frozen=True)
class PassageWindow:
    window_id: str
    page_range: tuple[int, int]  # 1-based inclusive
    text: str
    embedding: np.ndarray = field(repr=False, compare=False)


class SimilarityIndex:
    """Read-only nearest-neighbor index over manual page windows."""

    def __init__(self, windows: list[PassageWindow], embedder):
        self.windows = windows
        self.embedder = embedder
        self._matrix = (
            np.vstack([w.embedding for w in windows]) if windows else np.zeros((0, 1))
        )

    def query(self, text: str, k: int) -> list[PassageWindow]:
        if not self.windows:
            return []
        q = self.embedder(text)
        scores = self._matrix @ q
        ranked = sorted(
            range(len(self.windows)),
            key=lambda i: (-float(scores[i]), self.windows[i].window_id),
        )
        return [self.windows[i] for i in ranked[:k]]


def build_manual_index(pages: list[str], window_pages: int = 2,
                       overlap_pages: int = 1, embedder=None) -> SimilarityIndex:
    """Slide a page window over the manual and embed each window.

    Consecutive windows share ``overlap_pages`` pages; windows always cover
    every page. Window-level passages (not sentences) keep enough local API
    context for code generation.
    """
    if not pages:
        raise EmptyManual("manual has no pages")
    if window_pages < 1:
        raise ValueError("window_pages must be >= 1")
    if not 0 <= overlap_pages < window_pages:
        raise ValueError("overlap_pages must satisfy 0 <= overlap < window_pages")
    embedder = embedder or HashedBagOfWordsEmbedder()

    n = len(pages)
    stride = window_pages - overlap_pages
    windows: list[PassageWindow] = []
    start = 1
    seq = 0
    while start <= n:
        end = min(start + window_pages - 1, n)
        text = "\n".join(pages[start - 1:end])
        windows.append(PassageWindow(
            window_id=f"w{seq:04d}", page_range=(start, end),
            text=text, embedding=embedder(text),
        ))
        seq += 1
        if end == n:
            break
        start += stride
    return SimilarityIndex(windows, embedder)


def retrieve_windows(index: SimilarityIndex, query: str, k: int) -> list[PassageWindow]:
    if k < 1:
        raise ValueError("k must be >= 1")
    return index.query(query, k)


def load_manual_pages(path: str | Path | None = None) -> list[str]:
    """Read the page-delimited plain-text export of the backend manual."""
    if path is None:
        text = resources.files("pfagent.data").joinpath("manual.txt").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return [page.strip("\n") for page in text.split("\f") if page.strip()]


# --- case inventory -----------------------------------------------------------


@dataclass(frozen=True)
class CaseInventory:
    case_name: str
    devices: tuple[tuple[str, str, tuple[int, ...]], ...]  # (kind, idx, buses)
    rendered: str

    def identifiers(self) -> set[str]:
        return {idx for _, idx, _ in self.devices}


def build_case_inventory(system: backend.System) -> CaseInventory:
    """Enumerate the live case's device identifiers for prompt injection.

    Every index string is exactly what the backend reports; nothing is
    synthesized, so scripts grounded on the inventory cannot guess indices.
    """
    devices: list[tuple[str, str, tuple[int, ...]]] = []
    for bus in system.buses:
        devices.append(("Bus", bus.idx, (bus.number,)))
    for ln in system.lines:
        devices.append(("Line", ln.idx, (ln.bus1, ln.bus2)))
    for ld in system.loads:
        devices.append(("PQ", ld.idx, (ld.bus,)))
    for g in system.gens:
        devices.append(("PV", g.idx, (g.bus,)))
    if system.slack is not None:
        devices.append(("Slack", system.slack.idx, (system.slack.bus,)))

    lines = [f"Case: {system.name}"]
    by_kind: dict[str, list[str]] = {}
    for kind, idx, buses in devices:
        if kind == "Line":
            entry = f"{idx} (Bus_{buses[0]}-Bus_{buses[1]})"
        elif kind == "Bus":
            entry = idx
        else:
            entry = f"{idx} @ Bus_{buses[0]}"
        by_kind.setdefault(kind, []).append(entry)
    for kind in ("Bus", "Line", "PQ", "PV", "Slack"):
        if kind in by_kind:
            lines.append(f"{kind} ({len(by_kind[kind])}): " + ", ".join(by_kind[kind]))
    return CaseInventory(case_name=system.name, devices=tuple(devices),
                         rendered="\n".join(lines))


def load_case_for(case_ref: CaseReference, workspace: str | Path) -> backend.System:
    """Resolve a case reference against the backend / session workspace."""
    if case_ref.source == "builtin":
        return backend.get_case(case_ref.identifier)
    return backend.load(Path(workspace) / case_ref.identifier)


# --- code examples --------------------------------------------------------------


@dataclass(frozen=True)
class CodeExample:
    title: str
    task_tags: tuple[str, ...]
    code_text: str


def load_code_examples(path: str | Path | None = None) -> list[CodeExample]:
    if path is None:
        raw = json.loads(
            resources.files("pfagent.data").joinpath("code_examples.json").read_text("utf-8")
        )
    else:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return [CodeExample(r["title"], tuple(r["task_tags"]), r["code_text"]) for r in raw]


_MARKER_TAGS = {
    "VoltageCheck": "voltage_check",
    "LoadScaling": "load_scaling",
    "LoadAddition": "load_addition",
    "SetpointAdjustment": "setpoint",
    "TargetedLoadChange": "targeted_load",
    "TargetedGenChange": "targeted_gen",
    "LineOutage": "line_outage",
    "NMinus1": "n_minus_1",
    "Ranking": "ranking",
    "PlotRequest": "plot",
}


def select_examples(examples: list[CodeExample], objective: ParsedObjective,
                    top_n: int = 2) -> list[CodeExample]:
    """Pick the examples whose task tags best overlap the objective markers."""
    tags = {_MARKER_TAGS.get(m.marker, "") for m in objective.markers}
    tags.discard("")
    if objective.case_ref is not None:
        tags.add("uploaded" if objective.case_ref.source == "uploaded" else "builtin")
    if not any(_MARKER_TAGS.get(m.marker) not in (None, "voltage_check")
               for m in objective.markers):
        tags.add("baseline")
    scored = sorted(
        examples,
        key=lambda ex: (-len(tags & set(ex.task_tags)), ex.title),
    )
    return [ex for ex in scored[:top_n] if tags & set(ex.task_tags)]


# --- adaptive rules and the assembled prompt ------------------------------------


@dataclass(frozen=True)
class AdaptiveRuleSet:
    guidance: tuple[str, ...] = ()
    source_packs: tuple[str, ...] = ()


@dataclass
class PromptContext:
    objective: ParsedObjective
    retrieved_windows: list[PassageWindow]
    examples: list[CodeExample]
    inventory: CaseInventory
    rules: AdaptiveRuleSet
    compaction: str
    continuity_state: str
    user_text: str = ""
    dropped: list[str] = field(default_factory=list)

    def render(self) -> str:
        return render_prompt(self)


def compaction_summary(objective: ParsedObjective, history: list[str]) -> str:
    """Templated conversation summary: prior turns plus surviving edits."""
    parts = [f"Prior user turns: {max(len(history) - 1, 0)}."]
    if objective.case_ref is not None:
        parts.append(
            f"Active case: {objective.case_ref.identifier} ({objective.case_ref.source})."
        )
    active = objective.ledger.active_entries()
    if active:
        edits = "; ".join(
            f"turn {e.turn_index}: {e.marker} "
            + json.dumps(e.params, sort_keys=True)
            for e in active
        )
        parts.append(f"Modifications in effect: {edits}.")
    else:
        parts.append("No case modifications are in effect.")
    return " ".join(parts)


def _render_sections(ctx: PromptContext, n_windows: int, n_examples: int,
                     with_compaction: bool, with_rules: bool) -> list[tuple[str, str]]:
    sections: list[tuple[str, str]] = []
    if with_rules and ctx.rules.guidance:
        sections.append(("<<RULES>>", "\n".join(f"- {g}" for g in ctx.rules.guidance)))
    if n_windows > 0 and ctx.retrieved_windows:
        blocks = []
        for w in ctx.retrieved_windows[:n_windows]:
            lo, hi = w.page_range
            cite = f"[pages {lo}-{hi}]" if hi != lo else f"[page {lo}]"
            blocks.append(f"{cite} ({w.window_id})\n{w.text}")
        sections.append(("<<MANUAL>>", "\n\n".join(blocks)))
    if n_examples > 0 and ctx.examples:
        blocks = [f"# {ex.title}\n{ex.code_text}" for ex in ctx.examples[:n_examples]]
        sections.append(("<<EXAMPLES>>", "\n\n".join(blocks)))
    sections.append(("<<CASE_INVENTORY>>", ctx.inventory.rendered))
    sections.append(("<<CONTINUITY>>", ctx.continuity_state))
    if with_compaction and ctx.compaction:
        sections.append(("<<COMPACTION>>", ctx.compaction))
    return sections


def render_prompt(ctx: PromptContext, n_windows: int | None = None,
                  n_examples: int | None = None, with_compaction: bool = True,
                  with_rules: bool = True) -> str:
    if n_windows is None:
        n_windows = len(ctx.retrieved_windows)
    if n_examples is None:
        n_examples = len(ctx.examples)
    sections = _render_sections(ctx, n_windows, n_examples, with_compaction, with_rules)
    return "\n".join(f"{sentinel}\n{body}" for sentinel, body in sections)


def assemble_prompt(objective: ParsedObjective, index: SimilarityIndex,
                    examples: list[CodeExample], inventory: CaseInventory,
                    rules: AdaptiveRuleSet, history: list[str],
                    k: int = 4, budget: int = DEFAULT_PROMPT_BUDGET) -> PromptContext:
    """Assemble the system prompt from the four knowledge sources.

    Section order is fixed. When the character budget is exceeded the
    lowest-ranked manual windows are dropped first, then examples, then the
    compaction summary, then the rules; the inventory and continuity state
    are mandatory and trigger BudgetExhausted if they alone do not fit.
    """
    query_parts = history[-1:] + [m.marker for m in objective.markers]
    if objective.case_ref is not None:
        query_parts.append(objective.case_ref.identifier)
    windows = retrieve_windows(index, " ".join(query_parts), k) if index.windows else []
    chosen = select_examples(examples, objective)

    ctx = PromptContext(
        objective=objective,
        retrieved_windows=windows,
        examples=chosen,
        inventory=inventory,
        rules=rules,
        compaction=compaction_summary(objective, history),
        continuity_state=objective.ledger.serialize(),
        user_text=history[-1] if history else "",
    )

    mandatory = len(render_prompt(ctx, n_windows=0, n_examples=0,
                                  with_compaction=False, with_rules=False))
    if mandatory > budget:
        raise BudgetExhausted(
            f"inventory + continuity need {mandatory} chars, budget is {budget}"
        )

    n_windows = len(ctx.retrieved_windows)
    n_examples = len(ctx.examples)
    with_compaction = True
    with_rules = True
    while len(render_prompt(ctx, n_windows, n_examples, with_compaction, with_rules)) > budget:
        if n_windows > 0:
            n_windows -= 1
            ctx.dropped.append(f"window rank {n_windows + 1}")
        elif n_examples > 0:
            n_examples -= 1
            ctx.dropped.append(f"example rank {n_examples + 1}")
        elif with_compaction:
            with_compaction = False
            ctx.dropped.append("compaction")
        elif with_rules:
            with_rules = False
            ctx.dropped.append("rules")
        else:  # pragma: no cover - guarded by the mandatory check above
            break
    if ctx.dropped:
        logger.info("prompt budget trim: dropped %s", ", ".join(ctx.dropped))
    ctx.retrieved_windows = ctx.retrieved_windows[:n_windows]
    ctx.examples = ctx.examples[:n_examples]
    if not with_compaction:
        ctx.compaction = ""
    if not with_rules:
        ctx.rules = AdaptiveRuleSet()
    return ctx
