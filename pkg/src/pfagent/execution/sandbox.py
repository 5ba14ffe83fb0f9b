"""Isolated script execution with artifact capture.

Scripts run as a separate interpreter process whose working directory is
the session workspace; all artifacts must land there. A headless-plot
preamble is prepended to every script (rather than trusting generated
code to configure plotting), and the final ``RESULT_JSON:`` stdout line
is parsed into the structured result.
"""

from __future__ import annotations

import json
import os
import resource
import subprocess
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .gate import GeneratedScript
from .normalize import RESULT_SENTINEL

PLOT_SUFFIXES = {".png", ".svg", ".pdf", ".jpg", ".jpeg"}

HEADLESS_PREAMBLE = (
    "import os as _os\n"
    "_os.environ.setdefault('MPLBACKEND', 'Agg')\n"
    "_os.environ.setdefault('MPLCONFIGDIR', _os.path.join(_os.getcwd(), '.mplconfig'))\n"
)


@dataclass(frozen=True)
class SandboxLimits:
    wall_time: float = 120.0
    memory_bytes: int = 2 * 1024 ** 3


@dataclass
class ExecutionRecord:
    exit_status: int
    stdout: str
    stderr: str
    result: dict | None
    plot_files: list[str] = field(default_factory=list)
    wall_time: float = 0.0
    workspace: str = ""
    error_class: str | None = None  # Timeout | MemoryExceeded | NonzeroExit

    @property
    def succeeded(self) -> bool:
        return self.exit_status == 0

    def to_dict(self) -> dict:
        return {
            "exit_status": self.exit_status,
            "stdout": self.stdout,
            "stderr": self.stderr,
            "result": self.result,
            "plot_files": list(self.plot_files),
            "wall_time": self.wall_time,
            "workspace": self.workspace,
            "error_class": self.error_class,
        }


def parse_result_line(stdout: str) -> dict | None:
    """The structured result from the last well-formed sentinel line."""
    result = None
    for line in stdout.splitlines():
        if line.startswith(RESULT_SENTINEL):
            try:
                parsed = json.loads(line[len(RESULT_SENTINEL):])
            except json.JSONDecodeError:
                continue
            if isinstance(parsed, dict):
                result = parsed
    return result


def _snapshot(workspace: Path) -> set[str]:
    names = set()
    for p in workspace.rglob("*"):
        rel = p.relative_to(workspace).as_posix()
        if rel.startswith("."):
            continue
        if p.is_file():
            names.add(rel)
    return names


def _set_memory_limit(limit: int):
    def preexec():
        try:
            resource.setrlimit(resource.RLIMIT_AS, (limit, limit))
        except (ValueError, OSError):
            pass
    return preexec


def execute_sandboxed(script: GeneratedScript, workspace: str | Path,
                      limits: SandboxLimits | None = None,
                      script_name: str = "study_script.py") -> ExecutionRecord:
    limits = limits or SandboxLimits()
    workspace = Path(workspace).resolve()
    workspace.mkdir(parents=True, exist_ok=True)
    script_path = workspace / script_name
    script_path.write_text(HEADLESS_PREAMBLE + script.code, encoding="utf-8")

    before = _snapshot(workspace)
    env = dict(os.environ)
    env["MPLBACKEND"] = "Agg"
    env["PYTHONDONTWRITEBYTECODE"] = "1"

    start = time.monotonic()
    timed_out = False
    try:
        proc = subprocess.run(
            [sys.executable, str(script_path)],
            cwd=str(workspace),
            capture_output=True,
            text=True,
            timeout=limits.wall_time,
            env=env,
            preexec_fn=_set_memory_limit(limits.memory_bytes),
        )
        exit_status = proc.returncode
        stdout, stderr = proc.stdout, proc.stderr
    except subprocess.TimeoutExpired as exc:
        timed_out = True
        exit_status = -1
        stdout = (exc.stdout or b"").decode("utf-8", "replace") if isinstance(exc.stdout, bytes) else (exc.stdout or "")
        stderr = (exc.stderr or b"").decode("utf-8", "replace") if isinstance(exc.stderr, bytes) else (exc.stderr or "")
    elapsed = time.monotonic() - start

    after = _snapshot(workspace)
    new_files = sorted(after - before - {script_name})
    plot_files = [f for f in new_files if Path(f).suffix.lower() in PLOT_SUFFIXES]

    if timed_out:
        error_class = "Timeout"
    elif exit_status != 0:
        error_class = "MemoryExceeded" if "MemoryError" in stderr else "NonzeroExit"
    else:
        error_class = None

    return ExecutionRecord(
        exit_status=exit_status,
        stdout=stdout,
        stderr=stderr,
        result=parse_result_line(stdout),
        plot_files=plot_files,
        wall_time=elapsed,
        workspace=str(workspace),
        error_class=error_class,
    )
