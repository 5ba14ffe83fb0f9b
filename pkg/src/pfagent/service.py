"""HTTP facade for the companion UI and scripts.

All routes live under ``/api/v1/``. Sessions are serialized: a second
message while one is in flight returns 409 so continuity ordering can
never be violated from the outside. Provider credentials come only from
``PFAGENT_API_KEY`` (or the config endpoint's masked write), never from
request bodies.
"""

from __future__ import annotations

import os
import threading
import uuid
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, HTMLResponse
from pydantic import BaseModel, Field

from .errors import PFAgentError, ProviderError
from .evolution import load_profile
from .execution import (OpenAIChatProvider, ProviderMode, TemplateGateProvider,
                        make_mock_provider)
from .fixer import DemoRepairProvider
from .reporting import GlobalStream, append_event
from .session import AgentConfig, KnowledgeAssets, Session


class CreateSessionBody(BaseModel):
    mode: str | None = None


class MessageBody(BaseModel):
    text: str = Field(min_length=1)
    files: dict[str, str] | None = None


class FixBody(BaseModel):
    turn: int | None = None


class FeedbackBody(BaseModel):
    turn: int
    issue_text: str = Field(min_length=1)
    root_cause: str | None = None


class ConfigBody(BaseModel):
    mode: str | None = None
    static_checks_enabled: bool | None = None
    validate_fix_locally: bool | None = None
    fix_retry_limit: int | None = None
    max_attempts: int | None = None
    api_key: str | None = None


def _provider_for(mode: str):
    if mode == "template-gate":
        return TemplateGateProvider(), True, True
    if mode.startswith("mock:"):
        return make_mock_provider(mode.split(":", 1)[1]), False, True
    if mode in ("base", "fine-tuned"):
        pm = ProviderMode.BASE_MODEL if mode == "base" else ProviderMode.FINE_TUNED
        return OpenAIChatProvider(mode, pm, {}), False, False
    if mode in ("rag-base", "fine-tuned-rag"):
        pm = ProviderMode.BASE_MODEL if mode == "rag-base" else ProviderMode.FINE_TUNED
        return OpenAIChatProvider(mode, pm, {}), True, True
    raise ValueError(f"unknown provider mode '{mode}'")


class AgentRuntime:
    """Shared state behind the service: sessions, config, logs, profile."""

    def __init__(self, root: str | Path = "workspace",
                 profile_path: str | Path | None = None,
                 mode: str = "template-gate"):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.profile_path = Path(profile_path) if profile_path else self.root / "evolution_profile.json"
        self.stream = GlobalStream(self.root / "events.ndjson")
        self.config = AgentConfig(mode=mode)
        self.sessions: dict[str, Session] = {}
        self.locks: dict[str, threading.Lock] = {}
        try:
            profile = load_profile(self.profile_path)
        except PFAgentError:
            profile = None
        self.assets = KnowledgeAssets.load(profile)

    def create_session(self, mode: str | None = None) -> Session:
        session_id = uuid.uuid4().hex[:12]
        config = AgentConfig(**{**self.config.to_dict(),
                                **({"mode": mode} if mode else {})})
        provider, gate_enabled, use_retrieval = _provider_for(config.mode)
        config.gate_enabled = gate_enabled
        config.use_retrieval = use_retrieval
        session = Session(
            session_id, self.root / session_id, config,
            provider=provider, assets=self.assets, stream=self.stream,
            repair_provider=DemoRepairProvider(),
        )
        self.sessions[session_id] = session
        self.locks[session_id] = threading.Lock()
        return session

    def get(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail="unknown session")
        return session

    def refresh_session_provider(self, session: Session) -> None:
        provider, gate_enabled, use_retrieval = _provider_for(self.config.mode)
        session.provider = provider
        session.config.mode = self.config.mode
        session.config.gate_enabled = gate_enabled
        session.config.use_retrieval = use_retrieval
        session.config.static_checks_enabled = self.config.static_checks_enabled
        session.config.validate_fix_locally = self.config.validate_fix_locally
        session.config.fix_retry_limit = self.config.fix_retry_limit
        session.config.max_attempts = self.config.max_attempts


def create_app(runtime: AgentRuntime | None = None) -> FastAPI:
    runtime = runtime or AgentRuntime()
    app = FastAPI(title="pfagent service", version="1.0")
    app.state.runtime = runtime

    @app.post("/api/v1/sessions")
    def create_session(body: CreateSessionBody | None = None):
        try:
            session = runtime.create_session(body.mode if body else None)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {
            "session_id": session.session_id,
            "created_at": session.log.created_at,
            "mode": session.config.mode,
            "workspace": str(session.workspace),
        }

    @app.post("/api/v1/sessions/{session_id}/messages")
    def post_message(session_id: str, body: MessageBody):
        session = runtime.get(session_id)
        lock = runtime.locks[session_id]
        if not lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="a turn is already in progress")
        try:
            runtime.refresh_session_provider(session)
            outcome = session.handle_turn(body.text, body.files)
        finally:
            lock.release()
        if outcome.error_kind == "provider":
            raise HTTPException(status_code=502, detail=outcome.error)
        return outcome.report.to_dict()

    @app.post("/api/v1/sessions/{session_id}/execute")
    def re_execute(session_id: str, body: FixBody):
        from .execution import execute_sandboxed

        session = runtime.get(session_id)
        turns = [t for t in session.turns if t.script is not None]
        if body.turn is not None:
            turns = [t for t in turns if t.turn_index == body.turn]
        if not turns:
            raise HTTPException(status_code=422, detail="no executed script for that turn")
        target = turns[-1]
        record = execute_sandboxed(target.script, session.workspace,
                                   session.config.limits,
                                   script_name=f"turn_{target.turn_index}_rerun.py")
        append_event(session.log, "execution",
                     {"turn_index": target.turn_index, "rerun": True,
                      **record.to_dict()}, runtime.stream)
        return record.to_dict()

    @app.post("/api/v1/sessions/{session_id}/fix")
    def post_fix(session_id: str, body: FixBody | None = None):
        session = runtime.get(session_id)
        lock = runtime.locks[session_id]
        if not lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="a turn is already in progress")
        try:
            outcome = session.run_fix(body.turn if body else None)
        except ProviderError as exc:
            raise HTTPException(status_code=502, detail=str(exc))
        except PFAgentError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        finally:
            lock.release()
        return outcome.to_dict()

    @app.post("/api/v1/sessions/{session_id}/feedback")
    def post_feedback(session_id: str, body: FeedbackBody):
        session = runtime.get(session_id)
        turn = next((t for t in session.turns if t.turn_index == body.turn), None)
        if turn is None:
            raise HTTPException(status_code=422, detail="unknown turn")
        payload = {
            "turn_index": body.turn,
            "issue_text": body.issue_text,
            "root_cause": body.root_cause,
            "prompt_text": turn.user_text,
            "error_text": turn.record.stderr if turn.record else "",
        }
        append_event(session.log, "feedback", payload, runtime.stream)
        return {"recorded": True, "turn_index": body.turn}

    @app.get("/api/v1/sessions/{session_id}/log")
    def get_log(session_id: str):
        return runtime.get(session_id).log.to_dict()

    @app.get("/api/v1/sessions/{session_id}/plots/{name}")
    def get_plot(session_id: str, name: str):
        session = runtime.get(session_id)
        path = (session.workspace / Path(name).name).resolve()
        if not path.is_file() or session.workspace.resolve() not in path.parents:
            raise HTTPException(status_code=404, detail="unknown plot")
        return FileResponse(path)

    @app.get("/api/v1/config")
    def get_config():
        cfg = runtime.config.to_dict()
        cfg["api_key_set"] = bool(os.environ.get("PFAGENT_API_KEY"))
        return cfg

    @app.put("/api/v1/config")
    def put_config(body: ConfigBody):
        if body.mode is not None:
            try:
                _provider_for(body.mode)
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            runtime.config.mode = body.mode
        if body.static_checks_enabled is not None:
            runtime.config.static_checks_enabled = body.static_checks_enabled
        if body.validate_fix_locally is not None:
            runtime.config.validate_fix_locally = body.validate_fix_locally
        if body.fix_retry_limit is not None:
            runtime.config.fix_retry_limit = max(1, body.fix_retry_limit)
        if body.max_attempts is not None:
            runtime.config.max_attempts = max(1, body.max_attempts)
        if body.api_key is not None:
            os.environ["PFAGENT_API_KEY"] = body.api_key
        return get_config()

    @app.get("/api/v1/evolution/profile")
    def get_profile():
        try:
            return load_profile(runtime.profile_path).to_dict()
        except PFAgentError as exc:
            raise HTTPException(status_code=500, detail=str(exc))

    frontend_dist = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    for candidate in (Path.cwd() / "frontend" / "dist", frontend_dist):
        if candidate.is_dir():
            from fastapi.staticfiles import StaticFiles

            app.mount("/ui", StaticFiles(directory=candidate, html=True), name="ui")
            break

    @app.get("/", response_class=HTMLResponse)
    def root():
        return ('<html><body><h3>pfagent service</h3>'
                '<p>API under /api/v1/ — UI (when built) under <a href="/ui/">/ui/</a>.</p>'
                "</body></html>")

    return app


def main(host: str = "127.0.0.1", port: int = 8010,
         root: str = "workspace", mode: str = "template-gate") -> None:
    import uvicorn

    app = create_app(AgentRuntime(root=root, mode=mode))
    uvicorn.run(app, host=host, port=port, log_level="warning")
