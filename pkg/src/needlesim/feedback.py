"""Feedback modalities: routing of the contact force and actuator dynamics.

The total (possibly delayed) contact force is displayed through exactly one
channel per modality:

  HF   kinesthetic force at the handle (signed, physically applied)
  VF   horizontal bar level in [0, 1]
  CF   normal stress on index or thumb of the dominant hand
  CCF  same stresses on the contralateral hand

A force toward -z (resisting insertion) maps to the index finger, a force
toward +z maps to the thumb; magnitudes map 1:1 up to actuator saturation.
"""

from __future__ import annotations

import enum
import math
from typing import NamedTuple

from .params import ActuatorParams, FeedbackParams


class Modality(enum.Enum):
    HF = "HF"
    VF = "VF"
    CF = "CF"
    CCF = "CCF"

    @property
    def cutaneous(self) -> bool:
        return self in (Modality.CF, Modality.CCF)


class FeedbackCommand(NamedTuple):
    kinesthetic_force: float  # N, signed; nonzero only under HF
    index_stress: float       # N, >= 0
    thumb_stress: float       # N, >= 0
    visual_bar: float         # dimensionless in [0, 1]
    target_hand: str          # "dominant" | "contralateral"


ZERO_COMMAND = FeedbackCommand(0.0, 0.0, 0.0, 0.0, "dominant")


def route_force(f_total: float, modality: Modality, params: FeedbackParams) -> FeedbackCommand:
    """Map the total contact force onto the active modality's channel."""
    if not math.isfinite(f_total):
        raise ValueError("force must be finite")
    if modality is Modality.HF:
        return FeedbackCommand(f_total, 0.0, 0.0, 0.0, "dominant")
    if modality is Modality.VF:
        return FeedbackCommand(0.0, 0.0, 0.0, min(abs(f_total) / params.bar_full_scale, 1.0), "dominant")
    hand = "dominant" if modality is Modality.CF else "contralateral"
    if f_total < 0.0:
        return FeedbackCommand(0.0, -f_total, 0.0, 0.0, hand)
    if f_total > 0.0:
        return FeedbackCommand(0.0, 0.0, f_total, 0.0, hand)
    return FeedbackCommand(0.0, 0.0, 0.0, 0.0, hand)


class _StressChannel:
    """Transport delay, then first-order lag, then saturation."""

    def __init__(self, params: ActuatorParams, rate_hz: int):
        self._delay_ticks = round(params.transport_delay_ms * rate_hz / 1000.0)
        self._buf = [0.0] * self._delay_ticks
        self._idx = 0
        # Exact ZOH update of the lag keeps the 63% step-response point honest.
        self._alpha = math.exp(-1.0 / (rate_hz * params.time_constant_ms * 1e-3))
        self._max = params.max_force
        self._y = 0.0

    def step(self, u: float) -> float:
        if self._delay_ticks:
            delayed = self._buf[self._idx]
            self._buf[self._idx] = u
            self._idx = (self._idx + 1) % self._delay_ticks
        else:
            delayed = u
        # Sample-then-update: the returned value is y(t_k), the new state
        # holds the input over [t_k, t_k+1). Saturating the state keeps the
        # lag well posed (no wind-up past the force bound).
        out = self._y
        y = delayed + (self._y - delayed) * self._alpha
        self._y = 0.0 if y < 0.0 else (y if y <= self._max else self._max)
        return out


class CutaneousActuator:
    """Per-finger actuator pair; state owned by the loop."""

    def __init__(self, params: ActuatorParams, rate_hz: int):
        self._index = _StressChannel(params, rate_hz)
        self._thumb = _StressChannel(params, rate_hz)

    def step(self, command: FeedbackCommand) -> tuple[float, float]:
        """Advance one tick; returns applied (index, thumb) stresses."""
        return self._index.step(command.index_stress), self._thumb.step(command.thumb_stress)
