"""Simulated human operator closing the loop in batch trials.

An impedance-controlled hand (mass + PD servo) tracks an intent trajectory:
advance into the tissue, hold once the perceived contact force crosses the
stop threshold, extract on the beep. Kinesthetic feedback acts physically on
the hand; the cutaneous and visual channels act only through perception,
each behind its own modality-specific delay line.
"""

from __future__ import annotations

import enum

import numpy as np

from .feedback import Modality
from .loop import DelayLine, TelemetrySample
from .params import OperatorParams


class Intent(enum.Enum):
    INSERTING = "Inserting"
    HOLDING = "Holding"
    EXTRACTING = "Extracting"
    DONE = "Done"


_INTENT_ORDER = {
    Intent.INSERTING: 0,
    Intent.HOLDING: 1,
    Intent.EXTRACTING: 2,
    Intent.DONE: 3,
}


def perception_delay_ticks(params: OperatorParams, modality: Modality, rate_hz: int) -> int:
    ms = {
        Modality.HF: params.perception_delay_hf_ms,
        Modality.CF: params.perception_delay_cf_ms,
        Modality.CCF: params.perception_delay_ccf_ms,
        Modality.VF: params.perception_delay_vf_ms,
    }[modality]
    return round(ms * rate_hz / 1000.0)


class SimulatedOperator:
    """Owns the hand state for one trial; stepped once per loop tick."""

    def __init__(
        self,
        params: OperatorParams,
        modality: Modality,
        rate_hz: int,
        bar_full_scale: float,
        rng: np.random.Generator | None = None,
    ):
        params.validate()
        self.params = params
        self.modality = modality
        self.dt = 1.0 / rate_hz
        self._bar_full_scale = bar_full_scale
        self._perception = DelayLine(perception_delay_ticks(params, modality, rate_hz))
        self._rng = rng

        self.hand_z = params.start_position
        self.hand_v = 0.0
        self.intent = Intent.INSERTING
        self.intent_target = params.start_position
        self.perceived_force = 0.0

    def hand_command(self) -> float:
        """Hand position as measured by the device, optionally noisy."""
        if self.params.noise_std > 0.0 and self._rng is not None:
            return self.hand_z + self.params.noise_std * self._rng.standard_normal()
        return self.hand_z

    def perceive(self, sample: TelemetrySample) -> float:
        """Displayed magnitude of the active modality, perception-delayed."""
        if self.modality is Modality.HF:
            raw = abs(sample.kinesthetic)
        elif self.modality is Modality.VF:
            raw = sample.visual_bar * self._bar_full_scale
        else:
            # Exactly one of the two stresses is nonzero for any given force.
            raw = sample.applied_index + sample.applied_thumb
        self.perceived_force = self._perception.push(raw)
        return self.perceived_force

    def act(self, perceived: float, kinesthetic_force: float, beep: bool) -> None:
        """Advance the intent policy and the hand dynamics by one tick.

        Intent transitions are monotone: Inserting -> Holding -> Extracting
        -> Done. The hand ODE sees only the PD term plus the physically
        applied kinesthetic force (zero outside HF).
        """
        p = self.params
        dt = self.dt
        if self.intent is Intent.INSERTING:
            if beep:
                # Sound overrides the search for the fixture.
                self.intent = Intent.EXTRACTING
            else:
                self.intent_target += p.insertion_speed * dt
                if perceived >= p.stop_force_threshold:
                    self.intent = Intent.HOLDING
        elif self.intent is Intent.HOLDING:
            if beep:
                self.intent = Intent.EXTRACTING
        elif self.intent is Intent.EXTRACTING:
            self.intent_target = max(
                p.start_position, self.intent_target - p.extraction_speed * dt
            )
            if (
                self.intent_target == p.start_position
                and abs(self.hand_z - p.start_position) < p.done_tolerance
            ):
                self.intent = Intent.DONE

        f_pd = p.pd_stiffness * (self.intent_target - self.hand_z) - p.pd_damping * self.hand_v
        a = (f_pd + kinesthetic_force) / p.hand_mass
        self.hand_v += a * dt
        self.hand_z += self.hand_v * dt

    @property
    def done(self) -> bool:
        return self.intent is Intent.DONE


def intent_is_monotone(intents: list[Intent]) -> bool:
    """True when the logged intent sequence never moves backwards."""
    ranks = [_INTENT_ORDER[i] for i in intents]
    return all(b >= a for a, b in zip(ranks, ranks[1:]))
