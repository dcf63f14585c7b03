"""Shared test fixtures: hand-built telemetry samples."""

from __future__ import annotations

from needlesim.loop import TelemetrySample
from needlesim.tissue import ContactPhase


def sample_with(**kwargs) -> TelemetrySample:
    base = dict(
        tick=0, t=0.0, hand_z=0.0, z_n=0.0, v_n=0.0, z_t=0.02, v_t=0.0,
        phase=ContactPhase.NO_CONTACT, z_vf=0.123, f_h=0.0, f_vf=0.0,
        f_total=0.0, f_delayed=0.0, kinesthetic=0.0, index_stress=0.0,
        thumb_stress=0.0, visual_bar=0.0, target_hand="dominant",
        applied_index=0.0, applied_thumb=0.0, fixture_contact=False,
    )
    base.update(kwargs)
    return TelemetrySample(**base)
