"""Script generation, validation, and sandboxed execution."""

from .checks import StaticCheckReport, static_check
from .gate import GeneratedScript, gate_response_text, template_gate
from .normalize import count_fenced_blocks, normalize_response
from .pipeline import (DEFAULT_MAX_ATTEMPTS, AttemptLogEntry,
                       ExecutionEnvironment, generate_script, run_with_retries)
from .providers import (MOCK_BEHAVIORS, CompletionProvider, MockProvider,
                        OpenAIChatProvider, ProviderMode, TemplateGateProvider,
                        make_mock_provider)
from .sandbox import (ExecutionRecord, SandboxLimits, execute_sandboxed,
                      parse_result_line)

__all__ = [
    "StaticCheckReport", "static_check",
    "GeneratedScript", "gate_response_text", "template_gate",
    "count_fenced_blocks", "normalize_response",
    "DEFAULT_MAX_ATTEMPTS", "AttemptLogEntry", "ExecutionEnvironment",
    "generate_script", "run_with_retries",
    "MOCK_BEHAVIORS", "CompletionProvider", "MockProvider",
    "OpenAIChatProvider", "ProviderMode", "TemplateGateProvider",
    "make_mock_provider",
    "ExecutionRecord", "SandboxLimits", "execute_sandboxed", "parse_result_line",
]
