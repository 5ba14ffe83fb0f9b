"""Generation pipeline: provider call, normalization, validation, retries."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from ..errors import AttemptsExhausted
from ..intent import CaseReference
from ..knowledge import CaseInventory, PromptContext
from .checks import StaticCheckReport, static_check
from .gate import GeneratedScript
from .normalize import normalize_response
from .providers import CompletionProvider
from .sandbox import ExecutionRecord, SandboxLimits, execute_sandboxed

logger = logging.getLogger(__name__)

DEFAULT_MAX_ATTEMPTS = 3


@dataclass
class ExecutionEnvironment:
    case_ref: CaseReference | None
    inventory: CaseInventory | None
    workspace: str
    limits: SandboxLimits = field(default_factory=SandboxLimits)
    script_name: str = "study_script.py"


@dataclass
class AttemptLogEntry:
    attempt_index: int
    response_text: str
    script: GeneratedScript
    report: StaticCheckReport


def generate_script(prompt: PromptContext, provider: CompletionProvider,
                    feedback: list[str] | None = None,
                    attempt_index: int = 1) -> tuple[GeneratedScript, str]:
    """One provider call, normalized to a single executable script."""
    response = provider.complete(prompt, feedback)
    normalized = normalize_response(response)
    script = GeneratedScript(
        code=normalized.code,
        fenced_block_count=1,
        provenance="Model",
        attempt_index=attempt_index,
        appended_result_stmt=normalized.appended_result_stmt,
        raw_block_count=normalized.raw_block_count,
    )
    if normalized.raw_block_count != 1 or normalized.injected_imports:
        logger.info(
            "normalization: %d raw fenced blocks, injected imports %s, appended result %s",
            normalized.raw_block_count, list(normalized.injected_imports),
            normalized.appended_result_stmt,
        )
    return script, response


def run_with_retries(prompt: PromptContext, provider: CompletionProvider,
                     max_attempts: int, env: ExecutionEnvironment,
                     execute: bool = True,
                     ) -> tuple[GeneratedScript, StaticCheckReport,
                                ExecutionRecord | None, list[AttemptLogEntry]]:
    """Generate until the static checks pass, then execute once.

    Static-check messages feed back to the provider as a compilation-error
    signal between attempts; runtime failures do not retry here (they are
    the fix loop's job). Raises AttemptsExhausted with every report after
    the last failed attempt.
    """
    if max_attempts < 1:
        raise ValueError("max_attempts must be >= 1")
    attempts: list[AttemptLogEntry] = []
    feedback: list[str] | None = None
    for attempt in range(1, max_attempts + 1):
        script, response = generate_script(prompt, provider, feedback, attempt)
        report = static_check(script, env.case_ref, env.inventory)
        attempts.append(AttemptLogEntry(attempt, response, script, report))
        if report.passed:
            record = None
            if execute:
                record = execute_sandboxed(script, env.workspace, env.limits,
                                           env.script_name)
            return script, report, record, attempts
        feedback = list(report.messages)
        logger.info("attempt %d failed static checks: %s", attempt, report.messages)
    exc = AttemptsExhausted(
        f"all {max_attempts} generation attempts failed static validation",
        [a.report for a in attempts],
    )
    exc.attempts = attempts
    raise exc
