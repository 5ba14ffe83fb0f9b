"""Static validation of generated scripts before they reach the sandbox.

Two checks from the pipeline design: an AST-level syntax check and a
pattern-based case validator (correct loader call for the case source,
device identifiers resolved against the live inventory). A data-shipped
forbidden-pattern list catches sandbox-escape and index-guessing habits.
"""

from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass, field
from importlib import resources

from ..intent import CaseReference
from ..knowledge import CaseInventory
from .gate import GeneratedScript

_DEVICE_ID_RE = re.compile(r"^(?:Bus|Line|PQ|PV|Slack)_[A-Za-z0-9_]+$")


@dataclass
class StaticCheckReport:
    syntax_ok: bool
    case_load_ok: bool
    index_resolution_ok: bool
    forbidden_hits: list[tuple[str, str]] = field(default_factory=list)
    messages: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return (self.syntax_ok and self.case_load_ok
                and self.index_resolution_ok and not self.forbidden_hits)

    def to_dict(self) -> dict:
        return {
            "syntax_ok": self.syntax_ok,
            "case_load_ok": self.case_load_ok,
            "index_resolution_ok": self.index_resolution_ok,
            "forbidden_hits": [list(hit) for hit in self.forbidden_hits],
            "messages": list(self.messages),
            "passed": self.passed,
        }


_FORBIDDEN = None


def forbidden_patterns() -> list[dict]:
    global _FORBIDDEN
    if _FORBIDDEN is None:
        raw = json.loads(
            resources.files("pfagent.data")
            .joinpath("forbidden_patterns.json").read_text("utf-8")
        )
        _FORBIDDEN = [
            {"pattern": entry["pattern"], "reason": entry["reason"],
             "compiled": re.compile(entry["pattern"])}
            for entry in raw
        ]
    return _FORBIDDEN


def _string_literals(tree: ast.AST) -> list[str]:
    return [node.value for node in ast.walk(tree)
            if isinstance(node, ast.Constant) and isinstance(node.value, str)]


def static_check(script: GeneratedScript, case_ref: CaseReference | None,
                 inventory: CaseInventory | None) -> StaticCheckReport:
    code = script.code
    messages: list[str] = []

    tree = None
    try:
        tree = ast.parse(code)
        syntax_ok = True
    except SyntaxError as exc:
        syntax_ok = False
        messages.append(f"syntax error: {exc.msg} (line {exc.lineno})")

    case_load_ok = True
    if case_ref is not None:
        ident = re.escape(case_ref.identifier)
        if case_ref.source == "builtin":
            if not re.search(rf"backend\.get_case\(\s*['\"]{ident}['\"]\s*\)", code):
                case_load_ok = False
                messages.append(
                    f"built-in case must be loaded with backend.get_case(\"{case_ref.identifier}\")"
                )
            if re.search(r"backend\.load\(", code):
                case_load_ok = False
                messages.append("backend.load() is for uploaded files, not built-in cases")
        else:
            if not re.search(rf"backend\.load\(\s*['\"]{ident}['\"]\s*\)", code):
                case_load_ok = False
                messages.append(
                    f"uploaded case must be loaded with backend.load(\"{case_ref.identifier}\")"
                )
            if re.search(r"backend\.get_case\(", code):
                case_load_ok = False
                messages.append("backend.get_case() is for built-in cases, not uploaded files")

    index_resolution_ok = True
    if tree is not None and inventory is not None:
        known = inventory.identifiers()
        for literal in _string_literals(tree):
            if _DEVICE_ID_RE.match(literal) and literal not in known:
                index_resolution_ok = False
                messages.append(
                    f"identifier '{literal}' does not exist in the case inventory"
                )

    hits: list[tuple[str, str]] = []
    for entry in forbidden_patterns():
        m = entry["compiled"].search(code)
        if m:
            hits.append((entry["pattern"], f"offset {m.start()}"))
            messages.append(f"forbidden pattern: {entry['reason']}")

    return StaticCheckReport(
        syntax_ok=syntax_ok,
        case_load_ok=case_load_ok,
        index_resolution_ok=index_resolution_ok,
        forbidden_hits=hits,
        messages=messages,
    )
