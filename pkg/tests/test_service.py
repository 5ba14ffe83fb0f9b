"""HTTP facade: endpoint contracts, status codes, audit completeness."""

from __future__ import annotations

import threading

import pytest
from fastapi.testclient import TestClient

from pfagent.service import AgentRuntime, create_app


@pytest.fixture()
def client(tmp_path):
    app = create_app(AgentRuntime(root=tmp_path / "workspace"))
    with TestClient(app) as c:
        yield c


def _create(client) -> str:
    response = client.post("/api/v1/sessions", json={})
    assert response.status_code == 200
    return response.json()["session_id"]


def test_create_and_message_round_trip(client):
    sid = _create(client)
    response = client.post(f"/api/v1/sessions/{sid}/messages", json={
        "text": "Run a power flow on ieee14 and report the bus voltages."})
    assert response.status_code == 200
    report = response.json()
    assert report["result"]["converged"] is True
    assert "ieee14" in report["summary"]
    assert report["code"]


def test_unknown_session_404(client):
    assert client.get("/api/v1/sessions/nope/log").status_code == 404
    assert client.post("/api/v1/sessions/nope/messages",
                       json={"text": "x"}).status_code == 404


def test_malformed_body_422(client):
    sid = _create(client)
    assert client.post(f"/api/v1/sessions/{sid}/messages", json={}).status_code == 422
    assert client.post(f"/api/v1/sessions/{sid}/messages",
                       json={"text": ""}).status_code == 422


def test_fix_on_healthy_turn_422(client):
    sid = _create(client)
    client.post(f"/api/v1/sessions/{sid}/messages",
                json={"text": "Run a power flow on ieee14."})
    response = client.post(f"/api/v1/sessions/{sid}/fix", json={})
    assert response.status_code == 422
    assert "nothing to fix" in response.json()["detail"]


def test_seeded_failure_fix_cycle(client):
    sid = _create(client)
    client.post(f"/api/v1/sessions/{sid}/messages",
                json={"text": "Run a power flow on ieee14 and report the bus voltages."})
    assert client.put("/api/v1/config",
                      json={"mode": "mock:demo-failure"}).status_code == 200
    failing = client.post(f"/api/v1/sessions/{sid}/messages", json={
        "text": "Run it again with a demo failure, check the voltages"})
    assert failing.status_code == 200
    assert failing.json()["fix_available"] is True

    fixed = client.post(f"/api/v1/sessions/{sid}/fix", json={})
    assert fixed.status_code == 200
    assert fixed.json()["final"] == "Fixed"
    assert fixed.json()["iterations_used"] >= 1


def test_feedback_lands_in_log(client):
    sid = _create(client)
    client.post(f"/api/v1/sessions/{sid}/messages",
                json={"text": "Run a power flow on ieee14."})
    response = client.post(f"/api/v1/sessions/{sid}/feedback", json={
        "turn": 1, "issue_text": "numbers look wrong",
        "root_cause": "suspected loader confusion"})
    assert response.status_code == 200
    log = client.get(f"/api/v1/sessions/{sid}/log").json()
    feedback = [e for e in log["events"] if e["event_kind"] == "feedback"]
    assert feedback
    assert feedback[-1]["payload"]["root_cause"] == "suspected loader confusion"


def test_plot_served_and_missing_404(client):
    sid = _create(client)
    client.post(f"/api/v1/sessions/{sid}/messages",
                json={"text": "Run a power flow on ieee14."})
    client.post(f"/api/v1/sessions/{sid}/messages",
                json={"text": "Plot the voltage profile."})
    ok = client.get(f"/api/v1/sessions/{sid}/plots/voltage_profile.png")
    assert ok.status_code == 200
    assert ok.headers["content-type"] == "image/png"
    assert client.get(f"/api/v1/sessions/{sid}/plots/nope.png").status_code == 404


def test_execute_rerun(client):
    sid = _create(client)
    client.post(f"/api/v1/sessions/{sid}/messages",
                json={"text": "Run a power flow on ieee14 and report the bus voltages."})
    response = client.post(f"/api/v1/sessions/{sid}/execute", json={"turn": 1})
    assert response.status_code == 200
    assert response.json()["exit_status"] == 0
    assert response.json()["result"]["converged"] is True


def test_config_round_trip_and_masked_key(client, monkeypatch):
    monkeypatch.delenv("PFAGENT_API_KEY", raising=False)
    cfg = client.get("/api/v1/config").json()
    assert cfg["mode"] == "template-gate"
    assert cfg["api_key_set"] is False

    updated = client.put("/api/v1/config", json={
        "mode": "mock:gate-mimic", "api_key": "secret-key-value"}).json()
    assert updated["mode"] == "mock:gate-mimic"
    assert updated["api_key_set"] is True
    assert "secret-key-value" not in str(updated)

    assert client.put("/api/v1/config",
                      json={"mode": "bogus"}).status_code == 422


def test_evolution_profile_endpoint(client):
    response = client.get("/api/v1/evolution/profile")
    assert response.status_code == 200
    assert response.json()["version"] == 0


def test_in_flight_turn_conflict(tmp_path):
    app = create_app(AgentRuntime(root=tmp_path / "ws"))
    with TestClient(app) as client:
        sid = _create(client)
        runtime = app.state.runtime
        lock = runtime.locks[sid]
        assert lock.acquire()
        try:
            response = client.post(f"/api/v1/sessions/{sid}/messages",
                                   json={"text": "Run a power flow on ieee14."})
            assert response.status_code == 409
        finally:
            lock.release()
        # after release the turn goes through
        response = client.post(f"/api/v1/sessions/{sid}/messages",
                               json={"text": "Run a power flow on ieee14."})
        assert response.status_code == 200


def test_audit_every_mutating_call_logged(client):
    sid = _create(client)
    client.post(f"/api/v1/sessions/{sid}/messages",
                json={"text": "Run a power flow on ieee14."})
    client.post(f"/api/v1/sessions/{sid}/feedback",
                json={"turn": 1, "issue_text": "fine actually"})
    log = client.get(f"/api/v1/sessions/{sid}/log").json()
    kinds = [e["event_kind"] for e in log["events"]]
    assert "turn" in kinds
    assert "generation" in kinds
    assert "execution" in kinds
    assert "feedback" in kinds
