"""Online repair of failed scripts within a session.

When a study script raises at runtime, the fix loop assembles six context
sources plus repository retrieval into a repair prompt, calls a dedicated
repair provider, optionally validates the repaired code in the same
session workspace, and iterates until success or the retry limit. Every
outcome flows into the same event pipeline the self-evolution mechanism
consumes.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ProviderError
from .evolution import FailureSignature
from .execution import (ExecutionRecord, GeneratedScript, SandboxLimits,
                        execute_sandboxed, normalize_response)
from .reporting import GlobalStream, SessionLog, append_event

logger = logging.getLogger(__name__)

DEFAULT_CHUNK_CHARS = 1200
DEFAULT_OVERLAP_CHARS = 200
DEFAULT_TOP_K = 6
DEFAULT_RETRY_LIMIT = 3
FIX_PROMPT_BUDGET = 24_000

_SKIP_DIRS = {".git", "__pycache__", "node_modules", ".venv", "dist", "build",
              ".pytest_cache", ".mplconfig"}

BACKEND_API_NAMES = (
    "get_case", "load", "setup", "run_power_flow", "scale_loads", "add_load",
    "set_slack_voltage", "set_pv_voltage", "set_bus_load", "set_bus_gen",
    "line_outage", "line_outage_between", "trip_line_by_buses", "restore_line",
    "min_voltage", "max_voltage", "v_mag", "line_angle_deg", "gens_at",
    "total_load_mw", "RESULT_JSON",
)

_STOPWORDS = {
    "the", "a", "an", "is", "are", "was", "were", "in", "on", "of", "to",
    "and", "or", "not", "for", "with", "at", "by", "from", "this", "that",
    "it", "as", "be", "has", "have", "had", "but", "if", "else", "then",
    "most", "recent", "call", "last", "line", "file", "None", "True", "False",
}


@dataclass(frozen=True)
class FixRequest:
    user_message: str
    agent_response: str  # may be empty for gate-generated code
    failing_code: str
    output_and_errors: str
    workspace_files: tuple[str, ...]
    case_identifier_and_config: str

    def __post_init__(self):
        for name in ("user_message", "failing_code", "output_and_errors",
                     "case_identifier_and_config"):
            if not getattr(self, name).strip():
                raise ValueError(f"fix request field '{name}' must be populated")


@dataclass(frozen=True)
class RepoChunk:
    path: str
    chunk_index: int
    text: str
    overlap_chars: int


class RepoIndex:
    """Term-overlap retrieval over the chunked source tree."""

    def __init__(self, chunks: list[RepoChunk]):
        self.chunks = chunks

    def query(self, terms: list[str], k: int) -> list[RepoChunk]:
        if not terms or k <= 0:
            return []
        scored = []
        for chunk in self.chunks:
            path_lower = chunk.path.lower()
            text_lower = chunk.text.lower()
            score = 0.0
            for term in terms:
                t = term.lower()
                if t in path_lower:
                    score += 2.0
                if t in text_lower:
                    score += 1.0
            if score > 0:
                scored.append((score, chunk))
        scored.sort(key=lambda sc: (-sc[0], sc[1].path, sc[1].chunk_index))
        return [chunk for _, chunk in scored[:k]]


def chunk_text(text: str, chunk_chars: int, overlap_chars: int) -> list[tuple[int, int]]:
    """Split offsets: fixed stride with the final chunk absorbing the tail."""
    if not 0 <= overlap_chars < chunk_chars:
        raise ValueError("overlap must satisfy 0 <= overlap < chunk size")
    n = len(text)
    if n == 0:
        return []
    spans = []
    start = 0
    while True:
        if start + chunk_chars >= n:
            spans.append((start, n))
            break
        spans.append((start, start + chunk_chars))
        start += chunk_chars - overlap_chars
    return spans


def _is_binary(path: Path) -> bool:
    try:
        head = path.read_bytes()[:1024]
    except OSError:
        return True
    return b"\0" in head


def index_repository(source_tree: str | Path,
                     chunk_chars: int = DEFAULT_CHUNK_CHARS,
                     overlap_chars: int = DEFAULT_OVERLAP_CHARS) -> RepoIndex:
    """Chunk every text file under the tree; binaries are skipped."""
    root = Path(source_tree)
    chunks: list[RepoChunk] = []
    for path in sorted(root.rglob("*")):
        if not path.is_file():
            continue
        if any(part in _SKIP_DIRS for part in path.parts):
            continue
        if _is_binary(path):
            logger.debug("skipping binary file %s", path)
            continue
        try:
            text = path.read_text(encoding="utf-8")
        except (OSError, UnicodeDecodeError):
            continue
        rel = path.relative_to(root).as_posix()
        for i, (lo, hi) in enumerate(chunk_text(text, chunk_chars, overlap_chars)):
            chunks.append(RepoChunk(path=rel, chunk_index=i, text=text[lo:hi],
                                    overlap_chars=overlap_chars))
    return RepoIndex(chunks)


def extract_signal_terms(error_text: str, failing_code: str) -> list[str]:
    """Terms worth searching the repository for, error-derived terms first."""
    if not error_text and not failing_code:
        return []

    def harvest(text: str) -> list[str]:
        found = []
        found += re.findall(r"\b[A-Z][A-Za-z0-9]*(?:Error|Exception|Failure|Warning)\b", text)
        found += re.findall(r"['\"]([A-Za-z_][\w.\-]*)['\"]", text)
        found += re.findall(r"\b(?:Bus|Line|PQ|PV|Slack)_\w+\b", text)
        for api in BACKEND_API_NAMES:
            if api in text:
                found.append(api)
        return found

    error_terms = harvest(error_text or "")
    code_terms = harvest(failing_code or "")

    freq: dict[str, int] = {}
    in_error: set[str] = set()
    for term in error_terms:
        if term in _STOPWORDS:
            continue
        freq[term] = freq.get(term, 0) + 1
        in_error.add(term)
    for term in code_terms:
        if term in _STOPWORDS:
            continue
        freq[term] = freq.get(term, 0) + 1

    return sorted(
        freq,
        key=lambda t: (t not in in_error, -freq[t], -len(t), t),
    )


_SECTION_ORDER = (
    ("USER MESSAGE", "user_message"),
    ("AGENT RESPONSE", "agent_response"),
    ("FAILING CODE", "failing_code"),
    ("OUTPUT AND ERRORS", "output_and_errors"),
    ("WORKSPACE FILES", None),
    ("CASE AND CONFIGURATION", "case_identifier_and_config"),
)


class ScriptedRepairProvider:
    """Replays canned repair responses; the last one repeats (tests)."""

    def __init__(self, responses: list[str]):
        self.responses = responses
        self.calls = 0

    def repair(self, prompt: str) -> str:
        response = self.responses[min(self.calls, len(self.responses) - 1)]
        self.calls += 1
        return response


class DemoRepairProvider:
    """Deterministic offline repairer for seeded demonstration failures.

    Extracts the failing code from the fix prompt and strips injected
    fault lines (bare ``raise`` statements). Real deployments configure
    an HTTP reasoning model instead.
    """

    def repair(self, prompt: str) -> str:
        code = extract_prompt_section(prompt, "FAILING CODE")
        lines = [ln for ln in code.splitlines()
                 if not ln.strip().startswith("raise ")]
        return "```python\n" + "\n".join(lines).strip() + "\n```"


class HTTPRepairProvider:
    """Chat-completions repair client (separate model from the chat provider)."""

    def __init__(self, config: dict | None = None):
        self.config = config or {}

    def repair(self, prompt: str) -> str:
        import os

        import httpx

        api_key = os.environ.get("PFAGENT_API_KEY", "")
        if not api_key:
            raise ProviderError("PFAGENT_API_KEY is not set")
        endpoint = self.config.get("endpoint",
                                   "https://api.openai.com/v1/chat/completions")
        try:
            resp = httpx.post(
                endpoint,
                json={
                    "model": self.config.get("model", "gpt-4o-mini"),
                    "temperature": 0,
                    "messages": [{"role": "user", "content": prompt}],
                },
                headers={"Authorization": f"Bearer {api_key}"},
                timeout=self.config.get("timeout", 120.0),
            )
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except httpx.HTTPError as exc:
            raise ProviderError(f"repair request failed: {exc}") from exc
        except (KeyError, IndexError, ValueError) as exc:
            raise ProviderError(f"malformed repair reply: {exc}") from exc


def extract_prompt_section(prompt: str, title: str) -> str:
    """Pull one fixed-order section's body back out of a fix prompt."""
    marker = f"[{title}]\n"
    start = prompt.find(marker)
    if start < 0:
        return ""
    start += len(marker)
    end = prompt.find("\n\n[", start)
    return prompt[start:end] if end >= 0 else prompt[start:]


def assemble_fix_prompt(request: FixRequest, repo_items: list[RepoChunk],
                        budget: int = FIX_PROMPT_BUDGET) -> str:
    """Fixed-order six-source prompt plus cited repository context.

    The six sources are never truncated; repository items are dropped
    lowest-rank-first when the budget is tight.
    """
    parts: list[str] = [
        "A power-flow study script failed. Repair it and return exactly "
        "one fenced Python code block with the corrected script.",
    ]
    for title, attr in _SECTION_ORDER:
        if attr is None:
            body = "\n".join(request.workspace_files) or "(empty workspace)"
        else:
            body = getattr(request, attr) or "(none)"
        parts.append(f"[{title}]\n{body}")
    base = "\n\n".join(parts)

    kept = list(repo_items)
    while kept:
        repo_block = "\n\n".join(
            f"[REPOSITORY {c.path}#{c.chunk_index}]\n{c.text}" for c in kept
        )
        if len(base) + len(repo_block) + 2 <= budget:
            return base + "\n\n" + repo_block
        kept.pop()
    return base


@dataclass(frozen=True)
class FixAttempt:
    iteration: int
    repaired_code: str
    validation: ExecutionRecord | None
    succeeded: bool


@dataclass
class FixOutcome:
    attempts: list[FixAttempt] = field(default_factory=list)
    final: str = "BestEffort"  # "Fixed" | "BestEffort"
    iterations_used: int = 0
    validated_locally: bool = False

    @property
    def fixed(self) -> bool:
        return self.final == "Fixed"

    def last_error(self) -> str:
        for attempt in reversed(self.attempts):
            if attempt.validation is not None:
                return attempt.validation.stderr
        return ""

    def to_dict(self) -> dict:
        return {
            "final": self.final,
            "iterations_used": self.iterations_used,
            "validated_locally": self.validated_locally,
            "attempts": [
                {"iteration": a.iteration, "succeeded": a.succeeded,
                 "repaired_code": a.repaired_code}
                for a in self.attempts
            ],
        }


def repair_loop(request: FixRequest, repair_provider, repo_index: RepoIndex | None = None,
                workspace: str | Path = ".", validate_locally: bool = True,
                retry_limit: int = DEFAULT_RETRY_LIMIT,
                limits: SandboxLimits | None = None, top_k: int = DEFAULT_TOP_K,
                ) -> FixOutcome:
    """Iterate provider repair + local validation until success or the limit.

    The new error output replaces the old one between iterations. With
    validation disabled there is exactly one unvalidated best-effort
    attempt. A provider error aborts with whatever attempts exist.
    """
    if retry_limit < 1:
        raise ValueError("retry_limit must be >= 1")
    outcome = FixOutcome()
    current = request
    max_iters = retry_limit if validate_locally else 1

    for iteration in range(1, max_iters + 1):
        terms = extract_signal_terms(current.output_and_errors, current.failing_code)
        if not terms:
            terms = extract_signal_terms("", current.failing_code)
        repo_items = repo_index.query(terms, top_k) if repo_index is not None else []
        prompt = assemble_fix_prompt(current, repo_items)
        try:
            response = repair_provider.repair(prompt)
        except ProviderError as exc:
            logger.warning("repair provider failed at iteration %d: %s", iteration, exc)
            break
        code = normalize_response(response).code
        script = GeneratedScript(code=code, fenced_block_count=1,
                                 provenance="Repair", attempt_index=iteration)

        if not validate_locally:
            outcome.attempts.append(FixAttempt(iteration, code, None, False))
            break

        record = execute_sandboxed(script, workspace, limits,
                                   script_name=f"fix_attempt_{iteration}.py")
        succeeded = record.exit_status == 0
        outcome.attempts.append(FixAttempt(iteration, code, record, succeeded))
        if succeeded:
            break
        current = FixRequest(
            user_message=current.user_message,
            agent_response=current.agent_response,
            failing_code=code,
            output_and_errors=(record.stdout + "\n" + record.stderr).strip() or "(no output)",
            workspace_files=current.workspace_files,
            case_identifier_and_config=current.case_identifier_and_config,
        )

    outcome.iterations_used = len(outcome.attempts)
    outcome.validated_locally = validate_locally and bool(outcome.attempts)
    if outcome.attempts and outcome.attempts[-1].succeeded:
        outcome.final = "Fixed"
    else:
        outcome.final = "BestEffort"
    return outcome


def record_fix_event(outcome: FixOutcome, log: SessionLog,
                     library: list[FailureSignature],
                     request: FixRequest, turn_index: int = 0,
                     stream: GlobalStream | None = None) -> list[str]:
    """Log the repair outcome; queue matching packs on a failed fix.

    Returns the queued pack ids. A Fixed outcome contributes a
    conversation note; a BestEffort outcome is matched against the
    signature library so the next profile-update cycle can activate the
    corresponding constraint packs.
    """
    queued: list[str] = []
    remaining_error = outcome.last_error()
    if not outcome.fixed and remaining_error:
        for signature in library:
            if any(re.search(p, remaining_error, re.IGNORECASE)
                   for p in signature.error_patterns):
                queued.extend(signature.linked_packs)
    queued = sorted(set(queued))

    note = (
        f"fixed in {outcome.iterations_used} iteration(s), local validation "
        f"{'passed' if outcome.validated_locally and outcome.fixed else 'not run'}"
        if outcome.fixed
        else f"best-effort fix after {outcome.iterations_used} iteration(s); error remains"
    )
    append_event(log, "fix", {
        "final": outcome.final,
        "iterations_used": outcome.iterations_used,
        "validated_locally": outcome.validated_locally,
        "note": note,
        "turn_index": turn_index,
        "user_message": request.user_message,
        "remaining_error": remaining_error if not outcome.fixed else "",
        "queued_packs": queued,
        "repaired_code": outcome.attempts[-1].repaired_code if outcome.attempts else "",
    }, stream)
    return queued
