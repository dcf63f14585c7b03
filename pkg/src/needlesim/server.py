"""Interactive session service.

Paces the identical batch tick function against the wall clock, samples the
latest client hand position (zero-order hold), broadcasts decimated state
snapshots, and runs the same trial protocol as the harness. State messages
never carry the fixture position or any sub-surface needle extent; the
client sees only workspace-normalized needle and surface positions.
"""

from __future__ import annotations

import asyncio
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from .feedback import Modality
from .harness import (
    MissingEventError,
    Perturbation,
    TrialConfig,
    TrialRecord,
    _NO_INTENT,
    _PHASE_CODE,
    _canonicalize,
    compute_metrics,
    fixture_depth_for,
    write_record_csv,
)
from .loop import HapticLoop
from .params import SimParams
from .protocol import EV_BEEP, ProtocolTracker, TrialEvent

EV_INPUT_CLAMPED = "input_clamped"
EV_INPUT_STALE = "input_stale"


@dataclass
class ActiveTrial:
    trial_id: int
    config: TrialConfig
    loop: HapticLoop
    tracker: ProtocolTracker
    rows: list = field(default_factory=list)
    inputs_used: list[float] = field(default_factory=list)
    latest_input: float = 0.0
    last_input_tick: int = 0
    start_hand: float = 0.0
    beep_pending: bool = False
    clamp_episode: bool = False
    stale_episode: bool = False
    running: bool = True
    aborted: bool = False
    timed_out: bool = False
    target_hand: str = "dominant"


def _state_message(params: SimParams, sample, beep: bool) -> dict:
    # Workspace-normalized percentages: rest surface -> 0, workspace end -> 100.
    # The fixture position is deliberately absent from this mapping.
    rest = params.tissue.z_t_rest
    span = params.loop.motion_scale * params.server.hand_max - rest
    return {
        "type": "state",
        "t": sample.t,
        "needle_pct": (sample.z_n - rest) / span * 100.0,
        "tissue_pct": (sample.z_t - rest) / span * 100.0,
        "visual_bar": sample.visual_bar,
        "index_stress": sample.applied_index,
        "thumb_stress": sample.applied_thumb,
        "phase": sample.phase.value,
        "beep": beep,
    }


class Session:
    """One simulation session; at most one active trial, many viewers."""

    def __init__(
        self,
        params: SimParams,
        out_dir: str | Path | None = None,
        time_fn=time.monotonic,
    ):
        params.validate()
        self.params = params
        self.out_dir = Path(out_dir) if out_dir else None
        self.time_fn = time_fn
        self.clients: set[WebSocket] = set()
        self.trial: ActiveTrial | None = None
        self._trial_counter = 0
        self._task: asyncio.Task | None = None
        self.last_record: TrialRecord | None = None
        self.last_inputs: list[float] | None = None
        self.last_metrics: dict | None = None

    # -- trial lifecycle ----------------------------------------------------

    def start_trial(self, request: dict) -> dict:
        if self.trial is not None and self.trial.running:
            return {"type": "error", "code": "TrialActive"}
        try:
            modality = Modality(request.get("modality", "HF"))
        except ValueError:
            return {"type": "error", "code": "UnknownModality"}
        self._trial_counter += 1
        depth = request.get("fixture_depth")
        if depth is None:
            depth = fixture_depth_for(
                self.params.harness.seed, self._trial_counter, self.params
            )
        perturbation = None
        if request.get("perturbation"):
            perturbation = Perturbation(depth + self.params.harness.perturbation_increase)
        config = TrialConfig(
            modality=modality,
            fixture_depth=float(depth),
            feedback_delay_ms=float(
                request.get("feedback_delay_ms", self.params.loop.feedback_delay_ms)
            ),
            perturbation=perturbation,
            seed=self.params.harness.seed,
            trial_index=self._trial_counter,
            timeout_s=float(request.get("timeout_s", self.params.harness.trial_timeout_s)),
        )
        loop = HapticLoop(self.params, modality, config.fixture_depth, config.feedback_delay_ms)
        tracker = ProtocolTracker(loop.rate_hz, self.params.harness.contact_beep_s)
        self.trial = ActiveTrial(self._trial_counter, config, loop, tracker)
        return {"type": "ack", "trial_id": self._trial_counter, "modality": modality.value}

    def handle_input(self, hand_z: float) -> dict | None:
        trial = self.trial
        if trial is None or not trial.running:
            return {"type": "error", "code": "NoActiveTrial"}
        trial.latest_input = float(hand_z)
        trial.last_input_tick = trial.loop.tick_index
        trial.stale_episode = False
        return None

    def abort(self) -> dict | None:
        trial = self.trial
        if trial is None or not trial.running:
            return {"type": "error", "code": "NoActiveTrial"}
        trial.aborted = True
        trial.running = False
        return None

    def step_trial(self) -> bool:
        """Advance the active trial one tick; False once it finished."""
        trial = self.trial
        assert trial is not None
        if not trial.running:
            return False
        srv = self.params.server
        hand = trial.latest_input
        clamped = min(max(hand, srv.hand_min), srv.hand_max)
        if clamped != hand:
            if not trial.clamp_episode:
                trial.tracker.events.append(TrialEvent(
                    trial.loop.tick_index,
                    trial.loop.tick_index / trial.loop.rate_hz,
                    EV_INPUT_CLAMPED,
                ))
            trial.clamp_episode = True
        else:
            trial.clamp_episode = False
        stale_ticks = round(srv.input_stale_s * trial.loop.rate_hz)
        if trial.loop.tick_index - trial.last_input_tick > stale_ticks and not trial.stale_episode:
            trial.tracker.events.append(TrialEvent(
                trial.loop.tick_index,
                trial.loop.tick_index / trial.loop.rate_hz,
                EV_INPUT_STALE,
            ))
            trial.stale_episode = True

        sample = trial.loop.tick(clamped)
        fired = trial.tracker.update(sample)
        if EV_BEEP in fired:
            trial.beep_pending = True
            if trial.config.perturbation is not None:
                trial.loop.set_fixture_depth(trial.config.perturbation.new_depth)
                trial.tracker.note_perturbation(sample.tick)
        trial.target_hand = sample.target_hand
        trial.inputs_used.append(clamped)
        trial.rows.append((
            sample.hand_z, sample.z_n, sample.z_t, sample.z_vf,
            sample.f_h, sample.f_vf, sample.kinesthetic,
            sample.index_stress, sample.thumb_stress, sample.visual_bar,
            sample.applied_index, sample.applied_thumb,
            _PHASE_CODE[sample.phase.value], _NO_INTENT,
        ))
        self._latest_sample = sample

        done = (
            trial.tracker.beep_fired
            and abs(clamped - trial.start_hand) < self.params.operator.done_tolerance
        )
        if sample.tick + 1 >= round(trial.config.timeout_s * trial.loop.rate_hz):
            trial.timed_out = True
            trial.running = False
        elif done:
            trial.running = False
        return trial.running

    def finish_trial(self) -> dict:
        """Build the record, compute metrics, optionally dump the CSV."""
        trial = self.trial
        assert trial is not None
        trial.tracker.finish(len(trial.rows) - 1, timed_out=trial.timed_out)
        data = np.array(trial.rows) if trial.rows else np.empty((0, 14))
        record = TrialRecord(
            trial.config, trial.loop.rate_hz, _canonicalize(data),
            trial.tracker.sorted_events(), trial.target_hand,
            trial.timed_out,
        )
        self.last_record = record
        self.last_inputs = list(trial.inputs_used)
        try:
            metrics = compute_metrics(record)
            payload = {
                "avg_penetration": metrics.avg_penetration,
                "max_penetration": metrics.max_penetration,
                "completion_time": metrics.completion_time,
                "delta_p": metrics.delta_p,
                "oscillation_peaks": metrics.oscillation_peaks,
                "oscillation_amplitude": metrics.oscillation_amplitude,
                "timed_out": metrics.timed_out,
            }
        except MissingEventError as exc:
            payload = {"error": str(exc), "timed_out": trial.timed_out}
        payload["aborted"] = trial.aborted
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            write_record_csv(record, self.out_dir / f"trial_{trial.trial_id:04d}.csv")
        self.last_metrics = payload
        return {"type": "trial_done", "metrics": payload}

    # -- pacing and broadcast -----------------------------------------------

    async def run_paced(self) -> None:
        """Drive ticks against the wall clock and broadcast at ~60 Hz."""
        trial = self.trial
        assert trial is not None
        srv = self.params.server
        rate = trial.loop.rate_hz * srv.time_scale
        t0 = self.time_fn()
        next_broadcast = t0
        try:
            while trial.running:
                now = self.time_fn()
                due = int((now - t0) * rate)
                while trial.loop.tick_index < due and trial.running:
                    self.step_trial()
                if now >= next_broadcast and trial.rows:
                    await self.broadcast_state()
                    next_broadcast = now + 1.0 / srv.broadcast_hz
                await asyncio.sleep(min(0.002, 1.0 / (4.0 * srv.broadcast_hz)))
            if trial.rows:
                await self.broadcast_state()
            await self.broadcast(self.finish_trial())
        except asyncio.CancelledError:
            trial.running = False
            raise

    async def broadcast_state(self) -> None:
        trial = self.trial
        if trial is None or not hasattr(self, "_latest_sample"):
            return
        beep = trial.beep_pending
        trial.beep_pending = False
        await self.broadcast(_state_message(self.params, self._latest_sample, beep))

    async def broadcast(self, message: dict) -> None:
        dead = []
        payload = json.dumps(message)
        for ws in self.clients:
            try:
                await ws.send_text(payload)
            except Exception:
                dead.append(ws)
        for ws in dead:
            self.clients.discard(ws)

    def launch(self) -> None:
        self._task = asyncio.create_task(self.run_paced())


def create_app(
    params: SimParams | None = None,
    out_dir: str | Path | None = None,
    frontend_dir: str | Path | None = None,
) -> FastAPI:
    params = (params or SimParams()).validate()
    app = FastAPI(title="needlesim teleop server")
    session = Session(params, out_dir=out_dir)
    app.state.session = session

    @app.get("/healthz")
    async def healthz():
        return JSONResponse({"status": "ok"})

    @app.websocket("/session")
    async def session_ws(ws: WebSocket):
        await ws.accept()
        session.clients.add(ws)
        try:
            while True:
                message = await ws.receive_json()
                kind = message.get("type")
                if kind == "start_trial":
                    reply = session.start_trial(message)
                    await ws.send_text(json.dumps(reply))
                    if reply["type"] == "ack":
                        session.launch()
                elif kind == "input":
                    err = session.handle_input(float(message.get("hand_z", 0.0)))
                    if err is not None:
                        await ws.send_text(json.dumps(err))
                elif kind == "abort":
                    err = session.abort()
                    if err is not None:
                        await ws.send_text(json.dumps(err))
                else:
                    await ws.send_text(json.dumps({"type": "error", "code": "UnknownMessage"}))
        except WebSocketDisconnect:
            session.clients.discard(ws)

    if frontend_dir is not None:
        frontend = Path(frontend_dir)
        index = frontend / "index.html"
        dist = frontend / "dist"
        if dist.is_dir():
            app.mount("/dist", StaticFiles(directory=dist), name="dist")
        if index.is_file():
            @app.get("/")
            async def root():
                return FileResponse(index)

    return app
