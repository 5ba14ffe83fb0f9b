"""Completion providers: template gate, scripted mocks, and HTTP backends.

Mock and TemplateGate providers need no network and run the whole system
offline; the HTTP provider speaks the common chat-completions JSON shape
and reads its key from the ``PFAGENT_API_KEY`` environment variable.
Benchmark runs always pin temperature to 0.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from enum import Enum

import httpx

from ..errors import EmptyResponse, ProviderError
from ..intent import ModificationLedger, ParsedObjective
from ..knowledge import PromptContext
from .gate import gate_response_text, template_gate


class ProviderMode(str, Enum):
    BASE_MODEL = "BaseModel"
    FINE_TUNED = "FineTuned"
    MOCK = "Mock"
    TEMPLATE_GATE = "TemplateGate"


@dataclass
class CompletionProvider:
    name: str
    mode: ProviderMode
    config: dict = field(default_factory=dict)

    def complete(self, ctx: PromptContext, feedback: list[str] | None = None) -> str:
        raise NotImplementedError


class TemplateGateProvider(CompletionProvider):
    """Provider facade over the gate, for modes that never call a model."""

    def __init__(self):
        super().__init__(name="template-gate", mode=ProviderMode.TEMPLATE_GATE)

    def complete(self, ctx: PromptContext, feedback: list[str] | None = None) -> str:
        return gate_response_text(template_gate(ctx.objective))


class MockProvider(CompletionProvider):
    """Deterministic scripted provider driven by a behavior callable.

    The behavior receives (ctx, feedback, call_index) and returns the raw
    response text; call_index counts completions made by this instance.
    """

    def __init__(self, name: str, behavior):
        super().__init__(name=name, mode=ProviderMode.MOCK)
        self._behavior = behavior
        self.calls = 0

    def complete(self, ctx: PromptContext, feedback: list[str] | None = None) -> str:
        response = self._behavior(ctx, feedback or [], self.calls)
        self.calls += 1
        return response


class OpenAIChatProvider(CompletionProvider):
    """Minimal chat-completions client for the base / fine-tuned modes."""

    def __init__(self, name: str, mode: ProviderMode, config: dict):
        super().__init__(name=name, mode=mode, config=config)

    def complete(self, ctx: PromptContext, feedback: list[str] | None = None) -> str:
        api_key = os.environ.get("PFAGENT_API_KEY", "")
        if not api_key:
            raise ProviderError("PFAGENT_API_KEY is not set")
        endpoint = self.config.get("endpoint", "https://api.openai.com/v1/chat/completions")
        messages = [{"role": "system", "content": ctx.render()}]
        body = ctx.user_text or "Produce the study script for the parsed objective."
        if feedback:
            body += "\n\nThe previous attempt failed validation:\n" + "\n".join(feedback)
        messages.append({"role": "user", "content": body})
        try:
            resp = httpx.post(
                endpoint,
                json={
                    "model": self.config.get("model", "gpt-4o-mini"),
                    "temperature": 0,
                    "messages": messages,
                },
                headers={"Authorization": f"Bearer {api_key}"},
                timeout=self.config.get("timeout", 60.0),
            )
            resp.raise_for_status()
            payload = resp.json()
            content = payload["choices"][0]["message"]["content"]
        except httpx.HTTPError as exc:
            raise ProviderError(f"provider request failed: {exc}") from exc
        except (KeyError, IndexError, ValueError) as exc:
            raise ProviderError(f"malformed provider reply: {exc}") from exc
        if not content:
            raise EmptyResponse("provider returned empty content")
        return content


# --- scripted mock behaviors -------------------------------------------------


def mock_gate_mimic(ctx: PromptContext, feedback: list[str], call_index: int) -> str:
    """Behaves exactly like the template gate (useful as a healthy model stand-in)."""
    return gate_response_text(template_gate(ctx.objective))


def make_ledger_dropper(drop_from_turn: int = 3):
    """A provider that forgets prior-turn modifications from a given turn on.

    Mirrors the classic continuity failure: the model regenerates the
    study from scratch and silently drops the cumulative state.
    """

    def behavior(ctx: PromptContext, feedback: list[str], call_index: int) -> str:
        objective = ctx.objective
        if objective.turn_index >= drop_from_turn:
            kept = tuple(e for e in objective.ledger.entries
                         if e.turn_index == objective.turn_index)
            objective = dataclasses.replace(
                objective, ledger=ModificationLedger(entries=kept),
            )
        return gate_response_text(template_gate(objective))

    return behavior


GUARDRAIL_HINT = "line_outage_between"


def mock_outage_misuser(ctx: PromptContext, feedback: list[str], call_index: int) -> str:
    """Uses a deprecated outage alias unless the prompt rules forbid it.

    The alias executes fine and produces the right numbers, so only the
    grounding dimension fails; injected guidance mentioning the canonical
    call flips the behavior, which is what the evolution-recovery
    experiment measures.
    """
    response = gate_response_text(template_gate(ctx.objective))
    guided = any(GUARDRAIL_HINT in g for g in ctx.rules.guidance)
    if not guided:
        response = response.replace(".line_outage_between(", ".trip_line_by_buses(")
    return response


def make_fail_syntax_once():
    """First attempt returns broken code, afterwards defers to the gate."""

    def behavior(ctx: PromptContext, feedback: list[str], call_index: int) -> str:
        if call_index == 0:
            return "```python\ndef broken(:\n    pass\n```"
        return mock_gate_mimic(ctx, feedback, call_index)

    return behavior


def make_scripted(responses: list[str]):
    """Replays canned responses; the last one repeats when exhausted."""

    def behavior(ctx: PromptContext, feedback: list[str], call_index: int) -> str:
        return responses[min(call_index, len(responses) - 1)]

    return behavior


def mock_demo_failure(ctx: PromptContext, feedback: list[str], call_index: int) -> str:
    """Gate-quality scripts, except turns asking for a 'demo failure' raise."""
    response = gate_response_text(template_gate(ctx.objective))
    if "demo failure" in (ctx.user_text or "").lower():
        response = response.replace(
            'print("RESULT_JSON',
            'raise RuntimeError("demo failure: injected fault")\nprint("RESULT_JSON',
        )
    return response


MOCK_BEHAVIORS = {
    "gate-mimic": lambda: mock_gate_mimic,
    "drop-ledger-turn3": lambda: make_ledger_dropper(3),
    "outage-api-misuse": lambda: mock_outage_misuser,
    "fail-syntax-once": make_fail_syntax_once,
    "demo-failure": lambda: mock_demo_failure,
}


def make_mock_provider(behavior_name: str) -> MockProvider:
    if behavior_name not in MOCK_BEHAVIORS:
        raise ValueError(
            f"unknown mock behavior '{behavior_name}'; "
            f"known: {', '.join(sorted(MOCK_BEHAVIORS))}"
        )
    return MockProvider(name=f"mock:{behavior_name}",
                        behavior=MOCK_BEHAVIORS[behavior_name]())
