"""Per-session orchestration of the four-stage pipeline.

A session owns a private workspace, the cumulative intent state, the
knowledge assets loaded at session start (including evolution-profile
rules), and the per-session log. Turns execute strictly sequentially
inside a session; sessions are independent of each other.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

from . import backend
from .errors import (AmbiguousCase, AttemptsExhausted, CaseLoadFailure,
                     EmptyResponse, GateUnsupported, MalformedParam,
                     PFAgentError, ProviderError)
from .evolution import EvolutionProfile, load_signature_library
from .execution import (ExecutionEnvironment, ExecutionRecord, GeneratedScript,
                        SandboxLimits, StaticCheckReport, execute_sandboxed,
                        gate_response_text, run_with_retries, static_check,
                        template_gate)
from .fixer import (FixOutcome, FixRequest, RepoIndex, index_repository,
                    record_fix_event, repair_loop)
from .intent import (MarkerVocabulary, ParsedObjective, RequestKind,
                     SessionIntentState, UserTurn, advance_state, parse_turn)
from .knowledge import (AdaptiveRuleSet, CaseInventory, CodeExample,
                        PromptContext, SimilarityIndex, assemble_prompt,
                        build_case_inventory, build_manual_index,
                        load_case_for, load_code_examples, load_manual_pages)
from .reporting import (GlobalStream, SessionLog, TurnReport, append_event,
                        package_report)

logger = logging.getLogger(__name__)


@dataclass
class AgentConfig:
    mode: str = "template-gate"
    gate_enabled: bool = True
    use_retrieval: bool = True
    max_attempts: int = 3
    static_checks_enabled: bool = True
    validate_fix_locally: bool = True
    fix_retry_limit: int = 3
    retrieval_k: int = 4
    prompt_budget: int = 12_000
    limits: SandboxLimits = field(default_factory=SandboxLimits)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "gate_enabled": self.gate_enabled,
            "use_retrieval": self.use_retrieval,
            "max_attempts": self.max_attempts,
            "static_checks_enabled": self.static_checks_enabled,
            "validate_fix_locally": self.validate_fix_locally,
            "fix_retry_limit": self.fix_retry_limit,
            "retrieval_k": self.retrieval_k,
            "prompt_budget": self.prompt_budget,
        }


class KnowledgeAssets:
    """Read-only knowledge shared across sessions of one deployment."""

    def __init__(self, vocabulary: MarkerVocabulary, rules: AdaptiveRuleSet,
                 index: SimilarityIndex, examples: list[CodeExample]):
        self.vocabulary = vocabulary
        self.rules = rules
        self.index = index
        self.examples = examples

    @classmethod
    def load(cls, profile: EvolutionProfile | None = None,
             manual_path: str | Path | None = None) -> "KnowledgeAssets":
        profile = profile or EvolutionProfile()
        vocabulary = MarkerVocabulary.load_default().with_overrides(
            list(profile.marker_overrides), list(profile.pattern_overrides),
        )
        rules = AdaptiveRuleSet(
            guidance=tuple(profile.guidance),
            source_packs=tuple(sorted(profile.active_packs)),
        )
        index = build_manual_index(load_manual_pages(manual_path))
        return cls(vocabulary, rules, index, load_code_examples())


_EMPTY_INVENTORY = CaseInventory(case_name="", devices=(), rendered="(no case loaded)")


@dataclass
class TurnOutcome:
    turn_index: int
    user_text: str
    objective: ParsedObjective | None
    response_text: str
    script: GeneratedScript | None
    static_report: StaticCheckReport | None
    record: ExecutionRecord | None
    report: TurnReport
    error: str | None = None
    error_kind: str | None = None  # "parse" | "case" | "provider" | "gate"


class Session:
    def __init__(self, session_id: str, workspace: str | Path, config: AgentConfig,
                 provider=None, assets: KnowledgeAssets | None = None,
                 stream: GlobalStream | None = None, repair_provider=None,
                 repo_index: RepoIndex | None = None):
        self.session_id = session_id
        self.workspace = Path(workspace)
        self.workspace.mkdir(parents=True, exist_ok=True)
        self.config = config
        self.provider = provider
        self.repair_provider = repair_provider
        self.assets = assets or KnowledgeAssets.load()
        self.stream = stream
        self.log = SessionLog(session_id, self.workspace / "session_log.json")
        self.intent_state = SessionIntentState()
        self.turns: list[TurnOutcome] = []
        self.history: list[str] = []
        self._inventory_cache: tuple[str, CaseInventory] | None = None
        self._repo_index = repo_index

    # -- helpers -------------------------------------------------------------

    def _workspace_files(self) -> list[str]:
        skip = {"session_log.json"}
        return sorted(
            p.name for p in self.workspace.iterdir()
            if p.is_file() and not p.name.startswith(".")
            and p.name not in skip and p.suffix != ".py"
        )

    def _inventory_for(self, objective: ParsedObjective) -> CaseInventory:
        assert objective.case_ref is not None
        key = f"{objective.case_ref.source}:{objective.case_ref.identifier}"
        if self._inventory_cache and self._inventory_cache[0] == key:
            return self._inventory_cache[1]
        system = load_case_for(objective.case_ref, self.workspace)
        inventory = build_case_inventory(system)
        self._inventory_cache = (key, inventory)
        return inventory

    def _error_outcome(self, turn_index: int, text: str, message: str,
                       kind: str, objective=None) -> TurnOutcome:
        report = TurnReport(summary=message, result={}, turn_index=turn_index)
        outcome = TurnOutcome(
            turn_index=turn_index, user_text=text, objective=objective,
            response_text=message, script=None, static_report=None,
            record=None, report=report, error=message, error_kind=kind,
        )
        self.turns.append(outcome)
        append_event(self.log, "turn", {
            "turn_index": turn_index, "text": text, "error": message,
            "error_kind": kind,
        }, self.stream)
        return outcome

    # -- the pipeline ----------------------------------------------------------

    def handle_turn(self, text: str, attachments: dict[str, str] | None = None) -> TurnOutcome:
        turn_index = len(self.turns) + 1
        for name, content in (attachments or {}).items():
            (self.workspace / Path(name).name).write_text(content, encoding="utf-8")

        self.history.append(text)
        self.intent_state.workspace_files = self._workspace_files()
        turn = UserTurn(turn_index=turn_index, text=text,
                        attached_files=tuple((attachments or {}).keys()))

        try:
            objective = parse_turn(turn, self.intent_state, self.assets.vocabulary)
        except (AmbiguousCase, MalformedParam) as exc:
            return self._error_outcome(turn_index, text, str(exc), "parse")

        self.intent_state = advance_state(self.intent_state, objective)
        append_event(self.log, "turn", {
            "turn_index": turn_index, "text": text,
            "request_type": objective.request_type.value,
            "case": objective.case_ref.to_dict() if objective.case_ref else None,
            "gate": objective.coding_gate_triggered,
        }, self.stream)

        if objective.request_type is not RequestKind.RUNNABLE_CODE:
            summary = self._textual_answer(objective)
            report = TurnReport(summary=summary, result={}, turn_index=turn_index,
                                response_text=summary)
            outcome = TurnOutcome(turn_index, text, objective, summary, None,
                                  None, None, report)
            self.turns.append(outcome)
            return outcome

        if objective.case_ref is None:
            return self._error_outcome(
                turn_index, text,
                "No active case: name a built-in case or upload a case file first.",
                "case", objective,
            )
        try:
            inventory = self._inventory_for(objective)
        except CaseLoadFailure as exc:
            return self._error_outcome(turn_index, text, f"Case load failed: {exc}",
                                       "case", objective)

        if self.config.use_retrieval:
            ctx = assemble_prompt(objective, self.assets.index, self.assets.examples,
                                  inventory, self.assets.rules, self.history,
                                  k=self.config.retrieval_k,
                                  budget=self.config.prompt_budget)
        else:
            ctx = PromptContext(
                objective=objective, retrieved_windows=[], examples=[],
                inventory=_EMPTY_INVENTORY, rules=AdaptiveRuleSet(),
                compaction="", continuity_state=objective.ledger.serialize(),
                user_text=text,
            )

        env = ExecutionEnvironment(
            case_ref=objective.case_ref,
            inventory=inventory if self.config.static_checks_enabled else None,
            workspace=str(self.workspace),
            limits=self.config.limits,
            script_name=f"turn_{turn_index}_script.py",
        )

        script: GeneratedScript | None = None
        response_text = ""
        static_report: StaticCheckReport | None = None
        record: ExecutionRecord | None = None
        try:
            if self.config.gate_enabled and objective.coding_gate_triggered:
                script = template_gate(objective)
                response_text = gate_response_text(script)
                static_report = static_check(script, objective.case_ref, inventory)
                append_event(self.log, "generation", {
                    "turn_index": turn_index, "provenance": "Template",
                    "attempt": 1, "code": script.code,
                }, self.stream)
                append_event(self.log, "static_check",
                             {"turn_index": turn_index, **static_report.to_dict()},
                             self.stream)
                if not static_report.passed:
                    raise GateUnsupported(
                        f"gate script failed static checks: {static_report.messages}"
                    )
                record = execute_sandboxed(script, self.workspace,
                                           self.config.limits, env.script_name)
            else:
                if self.provider is None:
                    raise ProviderError(f"mode '{self.config.mode}' has no provider")
                script, static_report, record, attempts = run_with_retries(
                    ctx, self.provider, self.config.max_attempts, env,
                )
                for entry in attempts:
                    append_event(self.log, "generation", {
                        "turn_index": turn_index, "provenance": "Model",
                        "attempt": entry.attempt_index, "code": entry.script.code,
                    }, self.stream)
                    append_event(self.log, "static_check",
                                 {"turn_index": turn_index,
                                  "attempt": entry.attempt_index,
                                  **entry.report.to_dict()}, self.stream)
                response_text = attempts[-1].response_text
        except AttemptsExhausted as exc:
            for entry in getattr(exc, "attempts", []):
                append_event(self.log, "generation", {
                    "turn_index": turn_index, "provenance": "Model",
                    "attempt": entry.attempt_index, "code": entry.script.code,
                }, self.stream)
            self.intent_state.had_error = True
            return self._error_outcome(
                turn_index, text,
                f"Generation failed static validation after {self.config.max_attempts} attempts.",
                "provider", objective,
            )
        except (ProviderError, EmptyResponse) as exc:
            self.intent_state.had_error = True
            return self._error_outcome(turn_index, text,
                                       f"Provider failure: {exc}", "provider", objective)
        except GateUnsupported as exc:
            return self._error_outcome(turn_index, text, f"Gate failure: {exc}",
                                       "gate", objective)

        if record is not None:
            append_event(self.log, "execution", {
                "turn_index": turn_index, **record.to_dict(),
            }, self.stream)
        self.intent_state.had_error = record is None or record.exit_status != 0

        report = package_report(record, script, objective)
        report.turn_index = turn_index
        report.response_text = response_text
        outcome = TurnOutcome(turn_index, text, objective, response_text, script,
                              static_report, record, report)
        self.turns.append(outcome)
        return outcome

    def _textual_answer(self, objective: ParsedObjective) -> str:
        if objective.request_type is RequestKind.DEBUGGING:
            failing = next((t for t in reversed(self.turns)
                            if t.record is not None and t.record.exit_status != 0), None)
            if failing is None:
                return "No failed execution found in this session to debug."
            tail = failing.record.stderr.strip().splitlines()[-1:] or ["(no stderr)"]
            return (f"Turn {failing.turn_index} failed with: {tail[-1]}. "
                    "Use the fix action to attempt an automated repair.")
        return ("This assistant answers conceptual questions best through a study: "
                "ask for a runnable power-flow script to see the behavior directly.")

    # -- fixing ------------------------------------------------------------------

    def _ensure_repo_index(self) -> RepoIndex:
        if self._repo_index is None:
            root = Path(__file__).resolve().parent
            for candidate in (Path.cwd(), *Path.cwd().parents):
                if (candidate / "pyproject.toml").exists():
                    root = candidate
                    break
            self._repo_index = index_repository(root)
        return self._repo_index

    def run_fix(self, turn_index: int | None = None) -> FixOutcome:
        """Repair the given (default: latest) failed turn in this workspace."""
        candidates = [t for t in self.turns
                      if t.record is not None and t.record.exit_status != 0]
        if turn_index is not None:
            candidates = [t for t in candidates if t.turn_index == turn_index]
        if not candidates:
            raise PFAgentError("nothing to fix: no failed execution on record")
        if self.repair_provider is None:
            raise ProviderError("no repair provider configured")
        target = candidates[-1]
        case = target.objective.case_ref if target.objective else None
        request = FixRequest(
            user_message=target.user_text,
            agent_response=target.response_text if target.script and target.script.provenance != "Template" else "",
            failing_code=target.script.code if target.script else "",
            output_and_errors=(target.record.stdout + "\n" + target.record.stderr).strip(),
            workspace_files=tuple(self._workspace_files()),
            case_identifier_and_config=(
                f"case={case.source}:{case.identifier}; mode={self.config.mode}"
                if case else f"mode={self.config.mode}"
            ),
        )
        outcome = repair_loop(
            request, self.repair_provider, self._ensure_repo_index(),
            workspace=self.workspace,
            validate_locally=self.config.validate_fix_locally,
            retry_limit=self.config.fix_retry_limit,
            limits=self.config.limits,
        )
        record_fix_event(outcome, self.log, load_signature_library(), request,
                         turn_index=target.turn_index, stream=self.stream)
        target.report.fix_history.append(
            f"fix:{outcome.final}:{outcome.iterations_used}"
        )
        return outcome
