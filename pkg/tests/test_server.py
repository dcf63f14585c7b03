"""Session server: wire schema, information hiding, pacing, replay parity."""

from __future__ import annotations

import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from needlesim import SimParams, replay_inputs
from needlesim.server import Session, create_app

STATE_FIELDS = {
    "type", "t", "needle_pct", "tissue_pct", "visual_bar",
    "index_stress", "thumb_stress", "phase", "beep",
}
FORBIDDEN_SUBSTRINGS = ("z_vf", "fixture", "penetration", "z_n", "hand_z")

PARAMS = SimParams().validate()


def scaled_params(time_scale: float) -> SimParams:
    return replace(PARAMS, server=replace(PARAMS.server, time_scale=time_scale))


def drain_until(ws, predicate, limit=5000):
    """Receive messages until one satisfies the predicate; returns all seen."""
    seen = []
    for _ in range(limit):
        msg = ws.receive_json()
        seen.append(msg)
        if predicate(msg):
            return seen
    pytest.fail("expected message never arrived")


def test_healthz():
    client = TestClient(create_app(PARAMS))
    response = client.get("/healthz")
    assert response.status_code == 200
    assert response.json() == {"status": "ok"}


def test_serves_frontend_when_built():
    frontend = Path(__file__).resolve().parents[1] / "frontend"
    if not (frontend / "dist" / "main.js").is_file():
        pytest.skip("frontend not built")
    client = TestClient(create_app(PARAMS, frontend_dir=frontend))
    index = client.get("/")
    assert index.status_code == 200
    assert "canvas" in index.text
    bundle = client.get("/dist/main.js")
    assert bundle.status_code == 200


def test_input_without_trial_is_rejected():
    client = TestClient(create_app(PARAMS))
    with client.websocket_connect("/session") as ws:
        ws.send_json({"type": "input", "hand_z": 0.01})
        assert ws.receive_json() == {"type": "error", "code": "NoActiveTrial"}


def test_second_start_is_rejected_while_active():
    app = create_app(scaled_params(50.0))
    client = TestClient(app)
    with client.websocket_connect("/session") as ws:
        ws.send_json({"type": "start_trial", "modality": "HF", "fixture_depth": 0.123,
                      "timeout_s": 10.0})
        ack = ws.receive_json()
        assert ack["type"] == "ack" and ack["trial_id"] == 1
        ws.send_json({"type": "start_trial", "modality": "VF"})
        msgs = drain_until(ws, lambda m: m.get("type") == "error")
        assert msgs[-1]["code"] == "TrialActive"
        ws.send_json({"type": "abort"})
        drain_until(ws, lambda m: m.get("type") == "trial_done")


def test_state_schema_and_information_hiding():
    app = create_app(scaled_params(100.0))
    client = TestClient(app)
    with client.websocket_connect("/session") as ws:
        ws.send_json({"type": "start_trial", "modality": "VF", "fixture_depth": 0.123,
                      "timeout_s": 8.0})
        assert ws.receive_json()["type"] == "ack"
        ws.send_json({"type": "input", "hand_z": 0.0455})
        msgs = drain_until(ws, lambda m: m.get("type") == "trial_done")
        states = [m for m in msgs if m.get("type") == "state"]
        assert states, "no state broadcasts observed"
        for state in states:
            assert set(state.keys()) == STATE_FIELDS
            for key in state:
                for banned in FORBIDDEN_SUBSTRINGS:
                    assert banned not in key
        times = [s["t"] for s in states]
        assert all(b >= a for a, b in zip(times, times[1:]))  # monotone broadcasts
        # VF routing: bar active once in contact, stresses always zero
        assert any(s["visual_bar"] > 0.0 for s in states)
        assert all(s["index_stress"] == 0.0 and s["thumb_stress"] == 0.0 for s in states)


def test_beep_fires_exactly_once_and_trial_completes():
    app = create_app(scaled_params(200.0))
    client = TestClient(app)
    with client.websocket_connect("/session") as ws:
        ws.send_json({"type": "start_trial", "modality": "CF", "fixture_depth": 0.123,
                      "timeout_s": 30.0})
        assert ws.receive_json()["type"] == "ack"
        ws.send_json({"type": "input", "hand_z": 0.0455})
        beeps = 0
        done = None
        for _ in range(5000):
            msg = ws.receive_json()
            if msg.get("type") == "state" and msg["beep"]:
                beeps += 1
                ws.send_json({"type": "input", "hand_z": 0.0})
            if msg.get("type") == "trial_done":
                done = msg
                break
        assert beeps == 1
        assert done is not None
        metrics = done["metrics"]
        assert metrics["timed_out"] is False
        assert metrics["aborted"] is False
        assert metrics["avg_penetration"] >= 0.0


def test_input_to_render_round_trip_under_100ms():
    client = TestClient(create_app(PARAMS))
    with client.websocket_connect("/session") as ws:
        ws.send_json({"type": "start_trial", "modality": "HF", "fixture_depth": 0.123,
                      "timeout_s": 5.0})
        assert ws.receive_json()["type"] == "ack"
        drain_until(ws, lambda m: m.get("type") == "state")
        sent_at = time.perf_counter()
        ws.send_json({"type": "input", "hand_z": 0.02})
        drain_until(ws, lambda m: m.get("type") == "state" and m["needle_pct"] > 10.0)
        elapsed = time.perf_counter() - sent_at
        ws.send_json({"type": "abort"})
        drain_until(ws, lambda m: m.get("type") == "trial_done")
    assert elapsed < 0.100


def test_abort_reports_aborted_metrics():
    app = create_app(scaled_params(50.0))
    client = TestClient(app)
    with client.websocket_connect("/session") as ws:
        ws.send_json({"type": "start_trial", "modality": "CCF", "timeout_s": 20.0})
        assert ws.receive_json()["type"] == "ack"
        ws.send_json({"type": "abort"})
        msgs = drain_until(ws, lambda m: m.get("type") == "trial_done")
        assert msgs[-1]["metrics"]["aborted"] is True


class TestSessionDirect:
    """White-box stepping without the network or wall clock."""

    def run_scripted(self, session: Session, schedule) -> None:
        ack = session.start_trial({"modality": "CF", "fixture_depth": 0.123,
                                   "timeout_s": 20.0})
        assert ack["type"] == "ack"
        while session.trial.running:
            hand = schedule(session.trial.loop.tick_index)
            session.handle_input(hand)
            session.step_trial()
        session.finish_trial()

    def test_replay_reproduces_interactive_telemetry(self):
        session = Session(PARAMS)
        self.run_scripted(session, lambda k: 0.0455 if k < 5200 else 0.0)
        record = session.last_record
        assert record is not None and not record.timed_out
        replayed = replay_inputs(PARAMS, record.config, session.last_inputs)
        assert np.array_equal(record.data, replayed.data)
        assert record.events == replayed.events

    def test_out_of_range_input_is_clamped_and_flagged(self):
        session = Session(PARAMS)
        ack = session.start_trial({"modality": "HF", "fixture_depth": 0.123,
                                   "timeout_s": 2.0})
        assert ack["type"] == "ack"
        session.handle_input(0.5)  # beyond the 0.06 m workspace
        for _ in range(50):
            session.step_trial()
        assert session.trial.inputs_used[0] == PARAMS.server.hand_max
        assert any(e.name == "input_clamped" for e in session.trial.tracker.events)

    def test_stale_input_is_flagged_and_value_held(self):
        session = Session(PARAMS)
        session.start_trial({"modality": "HF", "fixture_depth": 0.123, "timeout_s": 5.0})
        session.handle_input(0.01)
        for _ in range(1500):  # > 1 s without fresh input
            session.step_trial()
        assert session.trial.inputs_used[-1] == 0.01
        assert any(e.name == "input_stale" for e in session.trial.tracker.events)

    def test_trial_counter_increments(self):
        session = Session(PARAMS)
        first = session.start_trial({"modality": "HF", "fixture_depth": 0.123})
        session.abort()
        session.finish_trial()
        second = session.start_trial({"modality": "VF", "fixture_depth": 0.123})
        assert (first["trial_id"], second["trial_id"]) == (1, 2)
