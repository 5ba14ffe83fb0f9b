"""Provider-response normalization: one fenced block, imports, result line."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import EmptyResponse

FENCE_RE = re.compile(r"```(?:python|py)?[ \t]*\n(.*?)\n?```", re.DOTALL)

RESULT_SENTINEL = "RESULT_JSON: "


@dataclass(frozen=True)
class NormalizedCode:
    code: str
    raw_block_count: int
    used_bare_text: bool
    injected_imports: tuple[str, ...]
    appended_result_stmt: bool


def count_fenced_blocks(text: str) -> int:
    return len(FENCE_RE.findall(text))


def normalize_response(text: str) -> NormalizedCode:
    """Reduce a provider response to exactly one executable script.

    Multiple fenced blocks collapse to the last complete one; responses
    with no fence are treated as bare code. Missing imports for the
    backend / json / pyplot are injected, and a structured-result print is
    appended when absent so the execution layer always has a parseable
    final line (an empty object still fails semantic scoring upstream).
    """
    if not text or not text.strip():
        raise EmptyResponse("provider returned no content")

    blocks = FENCE_RE.findall(text)
    used_bare = not blocks
    code = text.strip() if used_bare else blocks[-1].strip()
    if not code:
        raise EmptyResponse("provider returned an empty code block")

    injected: list[str] = []
    header: list[str] = []
    if "backend." in code and "import backend" not in code:
        header.append("from pfagent import backend")
    if re.search(r"\bplt\.", code) and "import matplotlib.pyplot" not in code:
        header.append("import matplotlib.pyplot as plt")

    appended_result = RESULT_SENTINEL.strip(": ") not in code
    if appended_result:
        code = code + '\nprint("RESULT_JSON: " + json.dumps({}))'
    if re.search(r"\bjson\.", code) and "import json" not in code:
        header.append("import json")

    if header:
        injected = header
        code = "\n".join(header) + "\n" + code

    return NormalizedCode(
        code=code,
        raw_block_count=len(blocks),
        used_bare_text=used_bare,
        injected_imports=tuple(injected),
        appended_result_stmt=appended_result,
    )
