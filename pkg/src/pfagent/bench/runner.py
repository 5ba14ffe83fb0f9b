"""Benchmark execution over a suite: full pipeline per scenario, aggregation.

Every scenario runs turn-by-turn through a fresh session (own workspace,
own provider instance); scoring compares each turn's transcript against
the suite's checks and the oracle's expected values.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

from ..errors import PFAgentError
from ..evolution import EvolutionProfile, FailureRecord
from ..execution import (OpenAIChatProvider, ProviderMode, TemplateGateProvider,
                         make_mock_provider)
from ..session import AgentConfig, KnowledgeAssets, Session
from .oracle import OracleCache, verify_expected
from .scoring import TurnScore, conversation_score, score_turn
from .suite import ScenarioSpec, Suite, materialize_uploaded_case

logger = logging.getLogger(__name__)

DIMENSION_KEYS = ("format", "grounding", "continuity", "execution",
                  "semantic", "artifact")


@dataclass(frozen=True)
class ModeSetup:
    name: str
    gate_enabled: bool
    use_retrieval: bool
    provider_factory: object  # callable -> provider or None


def resolve_mode(mode: str) -> ModeSetup:
    if mode == "template-gate":
        return ModeSetup(mode, True, True, lambda: TemplateGateProvider())
    if mode == "base":
        return ModeSetup(mode, False, False, lambda: OpenAIChatProvider(
            "base", ProviderMode.BASE_MODEL, {}))
    if mode == "fine-tuned":
        return ModeSetup(mode, False, False, lambda: OpenAIChatProvider(
            "fine-tuned", ProviderMode.FINE_TUNED, {}))
    if mode == "rag-base":
        return ModeSetup(mode, True, True, lambda: OpenAIChatProvider(
            "rag-base", ProviderMode.BASE_MODEL, {}))
    if mode == "fine-tuned-rag":
        return ModeSetup(mode, True, True, lambda: OpenAIChatProvider(
            "fine-tuned-rag", ProviderMode.FINE_TUNED, {}))
    if mode.startswith("mock:"):
        behavior = mode.split(":", 1)[1]
        return ModeSetup(mode, False, True, lambda: make_mock_provider(behavior))
    raise ValueError(f"unknown benchmark mode '{mode}'")


@dataclass
class ScenarioResult:
    scenario_id: str
    family: str
    source: str
    turns: list[TurnScore] = field(default_factory=list)
    # optional per-turn {result, expected} capture; not serialized
    transcripts: list[dict] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return len(self.turns) == 3 and all(t.passed for t in self.turns)

    @property
    def conversation_score(self) -> float:
        return conversation_score(self.turns)

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "family": self.family,
            "source": self.source,
            "passed": self.passed,
            "conversation_score": self.conversation_score,
            "turns": [t.to_dict() for t in self.turns],
        }


@dataclass
class SuiteReport:
    mode: str
    per_scenario_scores: list[ScenarioResult] = field(default_factory=list)
    invalid_scenarios: list[str] = field(default_factory=list)

    @property
    def n_scenarios(self) -> int:
        return len(self.per_scenario_scores)

    @property
    def scenario_pass_rate(self) -> float | None:
        if not self.per_scenario_scores:
            return None
        passed = sum(1 for s in self.per_scenario_scores if s.passed)
        return 100.0 * passed / len(self.per_scenario_scores)

    @property
    def per_turn_pass_rates(self) -> dict[str, float] | None:
        if not self.per_scenario_scores:
            return None
        rates = {}
        for i in range(3):
            turns = [s.turns[i] for s in self.per_scenario_scores if len(s.turns) > i]
            if turns:
                rates[str(i + 1)] = 100.0 * sum(t.passed for t in turns) / len(turns)
        return rates

    @property
    def per_family_pass_rates(self) -> dict[str, float] | None:
        if not self.per_scenario_scores:
            return None
        rates: dict[str, float] = {}
        families = sorted({s.family for s in self.per_scenario_scores})
        for family in families:
            group = [s for s in self.per_scenario_scores if s.family == family]
            rates[family] = 100.0 * sum(s.passed for s in group) / len(group)
        return rates

    @property
    def dimension_averages(self) -> dict[str, float] | None:
        if not self.per_scenario_scores:
            return None
        sums = {k: 0.0 for k in DIMENSION_KEYS}
        counts = {k: 0 for k in DIMENSION_KEYS}
        for scenario in self.per_scenario_scores:
            for turn in scenario.turns:
                values = {
                    "format": turn.s_fmt / 10.0,
                    "grounding": turn.s_gnd / 25.0,
                    "continuity": turn.s_cont / 15.0,
                    "execution": turn.s_exec / 20.0,
                    "semantic": turn.s_sem / 25.0,
                }
                if turn.artifact_applicable:
                    values["artifact"] = turn.s_art / 5.0
                for key, frac in values.items():
                    sums[key] += 100.0 * frac
                    counts[key] += 1
        return {k: (sums[k] / counts[k] if counts[k] else math.nan)
                for k in DIMENSION_KEYS}

    @property
    def failure_category_histogram(self) -> dict[str, int]:
        histogram: dict[str, int] = {}
        for scenario in self.per_scenario_scores:
            for turn in scenario.turns:
                for category in turn.failure_categories:
                    histogram[category] = histogram.get(category, 0) + 1
        return dict(sorted(histogram.items()))

    @property
    def mean_conversation_score(self) -> float | None:
        if not self.per_scenario_scores:
            return None
        return (sum(s.conversation_score for s in self.per_scenario_scores)
                / len(self.per_scenario_scores))

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "n_scenarios": self.n_scenarios,
            "per_scenario_scores": [s.to_dict() for s in self.per_scenario_scores],
            "scenario_pass_rate": self.scenario_pass_rate,
            "per_turn_pass_rates": self.per_turn_pass_rates,
            "per_family_pass_rates": self.per_family_pass_rates,
            "dimension_averages": self.dimension_averages,
            "failure_category_histogram": self.failure_category_histogram,
            "mean_conversation_score": self.mean_conversation_score,
            "invalid_scenarios": list(self.invalid_scenarios),
        }

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")
        return path


def run_scenario(scenario: ScenarioSpec, setup: ModeSetup, workspace: Path,
                 assets: KnowledgeAssets, cache: OracleCache,
                 oracle_dir: Path, keep_transcripts: bool = False) -> ScenarioResult:
    config = AgentConfig(mode=setup.name, gate_enabled=setup.gate_enabled,
                         use_retrieval=setup.use_retrieval)
    provider = setup.provider_factory() if setup.provider_factory else None
    session = Session(scenario.scenario_id, workspace, config,
                      provider=provider, assets=assets)
    if scenario.uploaded_file:
        materialize_uploaded_case(scenario.family, workspace / scenario.uploaded_file)

    result = ScenarioResult(scenario.scenario_id, scenario.family, scenario.source)
    for turn in scenario.turns:
        outcome = session.handle_turn(turn.prompt)
        sem_spec = verify_expected(scenario, turn.turn_index, oracle_dir, cache)
        score = score_turn(
            response_text=outcome.response_text,
            code=outcome.script.code if outcome.script else "",
            record=outcome.record,
            grounding=list(turn.grounding_checks),
            continuity=list(turn.continuity_checks),
            sem_spec=sem_spec,
            expects_plot=turn.expects_plot,
            plot_file=turn.plot_file,
            workspace=workspace,
        )
        result.turns.append(score)
        if keep_transcripts:
            result.transcripts.append({
                "result": outcome.record.result if outcome.record else None,
                "expected": dict(sem_spec.expected),
            })
    return result


def run_benchmark(suite: Suite, mode: str, workspace_root: str | Path,
                  profile: EvolutionProfile | None = None,
                  assets: KnowledgeAssets | None = None,
                  keep_transcripts: bool = False) -> SuiteReport:
    """Run every scenario through the full pipeline and aggregate scores.

    Provider failures score as failed turns; infrastructure failures mark
    the scenario invalid and exclude it from the rates with a warning.
    """
    setup = resolve_mode(mode)
    workspace_root = Path(workspace_root)
    workspace_root.mkdir(parents=True, exist_ok=True)
    oracle_dir = workspace_root / "_oracle_cases"
    assets = assets or KnowledgeAssets.load(profile)
    cache = OracleCache()
    report = SuiteReport(mode=mode)

    for scenario in suite.scenarios:
        workspace = workspace_root / scenario.scenario_id
        try:
            result = run_scenario(scenario, setup, workspace, assets, cache,
                                  oracle_dir, keep_transcripts)
        except PFAgentError:
            raise
        except Exception as exc:  # infrastructure failure, not provider failure
            logger.warning("scenario %s invalid: %s", scenario.scenario_id, exc)
            report.invalid_scenarios.append(scenario.scenario_id)
            continue
        report.per_scenario_scores.append(result)
    return report


def failure_records_from_report(report: SuiteReport, suite: Suite) -> list[FailureRecord]:
    """Turn every failed suite turn into an attribution-ready failure record."""
    by_id = {s.scenario_id: s for s in suite.scenarios}
    records: list[FailureRecord] = []
    for scenario_result in report.per_scenario_scores:
        spec = by_id.get(scenario_result.scenario_id)
        if spec is None:
            continue
        for i, turn_score in enumerate(scenario_result.turns):
            if turn_score.passed:
                continue
            records.append(FailureRecord(
                origin="benchmark",
                prompt_text=spec.turns[i].prompt,
                error_text="",
                failed_dimensions=tuple(turn_score.failure_categories),
                scenario_id=scenario_result.scenario_id,
                turn_index=i + 1,
            ))
    return records
