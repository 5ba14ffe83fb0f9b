"""Benchmark suite generation, six-dimension scoring, oracle, and runner."""

from .oracle import OracleCache, expected_payload, verify_expected
from .runner import (ModeSetup, ScenarioResult, SuiteReport,
                     failure_records_from_report, resolve_mode, run_benchmark)
from .scoring import (DIMENSIONS, SEMANTIC_TOLERANCE, SemanticKeySpec,
                      TurnScore, WeightedCheck, conversation_score,
                      semantic_score, score_turn, weighted_pattern_score)
from .suite import (ScenarioSpec, Suite, TurnSpec, generate_suite,
                    materialize_uploaded_case)
from .tasks import CORE_FOLLOWUPS, TASK_TYPES

__all__ = [
    "OracleCache", "expected_payload", "verify_expected",
    "ModeSetup", "ScenarioResult", "SuiteReport",
    "failure_records_from_report", "resolve_mode", "run_benchmark",
    "DIMENSIONS", "SEMANTIC_TOLERANCE", "SemanticKeySpec", "TurnScore",
    "WeightedCheck", "conversation_score", "semantic_score", "score_turn",
    "weighted_pattern_score",
    "ScenarioSpec", "Suite", "TurnSpec", "generate_suite",
    "materialize_uploaded_case",
    "CORE_FOLLOWUPS", "TASK_TYPES",
]
