"""Fixed-rate master-slave loop.

One tick: hand position -> floor quantization -> motion scaling -> tissue
step -> total force into the feedback-path delay line -> routing -> actuator.
The command path (hand to needle) is undelayed; only the feedback path is
delayed. Time is tick-indexed (t = tick / rate), so simulated time never
drifts. The same tick function drives batch trials and interactive sessions.
"""

from __future__ import annotations

import math
from typing import NamedTuple

from .feedback import CutaneousActuator, FeedbackCommand, Modality, route_force
from .params import SimParams
from .tissue import (
    ContactPhase,
    NeedleState,
    NonFiniteStateError,
    TissueModel,
    TissueState,
    initial_state,
)


def quantize_position(x: float, resolution: float) -> float:
    """Floor the position to the encoder grid (nearest lower multiple).

    The small forward nudge keeps exact grid multiples on the grid despite
    binary rounding of decimal resolutions.
    """
    if resolution <= 0.0:
        raise ValueError("resolution must be positive")
    return math.floor(x / resolution + 1e-9) * resolution


def scale_to_virtual(hand_z: float, config) -> float:
    """Quantized hand position mapped into the virtual workspace."""
    return config.motion_scale * quantize_position(hand_z, config.encoder_resolution)


class DelayLine:
    """Pure transport delay in whole ticks; outputs 0 until primed."""

    def __init__(self, delay_ticks: int):
        if delay_ticks < 0:
            raise ValueError("delay must be non-negative")
        self.delay_ticks = delay_ticks
        self._buf = [0.0] * delay_ticks
        self._idx = 0

    def push(self, x: float) -> float:
        if not self.delay_ticks:
            return x
        out = self._buf[self._idx]
        self._buf[self._idx] = x
        self._idx = (self._idx + 1) % self.delay_ticks
        return out


class TelemetrySample(NamedTuple):
    tick: int
    t: float
    hand_z: float        # hand position used this tick, m
    z_n: float           # needle position, m
    v_n: float           # needle velocity, m/s
    z_t: float           # tissue surface, m
    v_t: float
    phase: ContactPhase
    z_vf: float          # fixture depth in effect this tick, m
    f_h: float           # tissue contact force, N
    f_vf: float          # fixture force, N
    f_total: float       # superposed force entering the delay line, N
    f_delayed: float     # force leaving the delay line, N
    kinesthetic: float   # routed handle force (HF only), N
    index_stress: float  # routed stresses before actuator dynamics, N
    thumb_stress: float
    visual_bar: float
    target_hand: str
    applied_index: float  # actuator outputs actually felt, N
    applied_thumb: float
    fixture_contact: bool


class HapticLoop:
    """Owns all per-trial mutable state; exactly one producer of ticks."""

    def __init__(self, params: SimParams, modality: Modality,
                 fixture_depth: float | None = None,
                 feedback_delay_ms: float | None = None):
        params.validate()
        self.params = params
        self.modality = modality
        self.dt = params.loop.dt
        self.rate_hz = params.loop.rate_hz
        self.z_vf = params.tissue.z_vf if fixture_depth is None else fixture_depth
        if self.z_vf <= params.tissue.z_t_rest:
            raise ValueError("fixture depth must exceed the rest surface position")

        delay_ms = params.loop.feedback_delay_ms if feedback_delay_ms is None else feedback_delay_ms
        self._delay = DelayLine(round(delay_ms * self.rate_hz / 1000.0))
        self._tissue = TissueModel(params.tissue, self.dt)
        self._actuator = CutaneousActuator(params.feedback.actuator, self.rate_hz)
        self._state: TissueState = initial_state(params.tissue)
        self._z_n_prev: float | None = None
        self.tick_index = 0

    @property
    def tissue_state(self) -> TissueState:
        return self._state

    def set_fixture_depth(self, depth: float) -> None:
        """Move the fixture (perturbation trials); takes effect next tick."""
        self.z_vf = depth

    def tick(self, hand_z: float) -> TelemetrySample:
        if not math.isfinite(hand_z):
            raise NonFiniteStateError(f"hand input is not finite: {hand_z!r}")
        k = self.tick_index
        z_n = scale_to_virtual(hand_z, self.params.loop)
        if self._z_n_prev is None:
            v_n = 0.0
        else:
            v_n = (z_n - self._z_n_prev) / self.dt
        self._z_n_prev = z_n
        needle = NeedleState(z_n, v_n)

        self._state, f_h, f_vf = self._tissue.step(self._state, needle, self.z_vf)
        f_total = f_h + f_vf
        f_delayed = self._delay.push(f_total)

        command = route_force(f_delayed, self.modality, self.params.feedback)
        applied_index, applied_thumb = self._actuator.step(command)

        sample = TelemetrySample(
            tick=k,
            t=k / self.rate_hz,
            hand_z=hand_z,
            z_n=z_n,
            v_n=v_n,
            z_t=self._state.z_t,
            v_t=self._state.v_t,
            phase=self._state.phase,
            z_vf=self.z_vf,
            f_h=f_h,
            f_vf=f_vf,
            f_total=f_total,
            f_delayed=f_delayed,
            kinesthetic=command.kinesthetic_force,
            index_stress=command.index_stress,
            thumb_stress=command.thumb_stress,
            visual_bar=command.visual_bar,
            target_hand=command.target_hand,
            applied_index=applied_index,
            applied_thumb=applied_thumb,
            fixture_contact=self._state.fixture_contact,
        )
        self.tick_index = k + 1
        return sample


def applied_command(sample: TelemetrySample) -> FeedbackCommand:
    """Feedback as actually displayed: actuator outputs on the stress channels."""
    return FeedbackCommand(
        sample.kinesthetic,
        sample.applied_index,
        sample.applied_thumb,
        sample.visual_bar,
        sample.target_hand,
    )
