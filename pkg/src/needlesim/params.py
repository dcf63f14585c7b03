"""Parameter sets for the simulator.

All internal units are SI (m, N, s, kg). Defaults reproduce the reference
configuration; every field can be overridden from a flat key/value config
file (JSON object, one level deep) or per-field keyword overrides.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    """Raised when a parameter set violates its invariants."""


@dataclass(frozen=True)
class TissueParams:
    """Physical constants of the tissue / fixture model."""

    k_t: float = 2.0        # tissue stiffness, N/m
    b_t: float = 5.0        # tissue damping, N*s/m
    m_t: float = 1.0        # lumped tissue mass, kg
    v_t: float = 0.7        # sub-tissue viscous coefficient, N*s/m
    k_vf: float = 3000.0    # fixture stiffness, N/m
    f_p: float = 0.1        # penetration force threshold, N
    z_t_rest: float = 0.020  # rest surface position, m
    z_vf: float = 0.123     # fixture position, m

    def validate(self) -> None:
        for f in fields(self):
            if getattr(self, f.name) <= 0.0:
                raise ConfigError(f"tissue parameter {f.name} must be positive")
        if self.z_vf <= self.z_t_rest:
            raise ConfigError("fixture must sit deeper than the rest surface")

    @property
    def stiffness_ratio(self) -> float:
        return self.k_vf / self.k_t


@dataclass(frozen=True)
class LoopConfig:
    """Master-slave loop configuration."""

    rate_hz: int = 1000
    feedback_delay_ms: float = 0.0
    encoder_resolution: float = 1e-5  # position quantum, m
    motion_scale: float = 3.0         # hand-to-virtual scale

    def validate(self) -> None:
        if self.rate_hz <= 0:
            raise ConfigError("rate_hz must be positive")
        if self.encoder_resolution <= 0.0:
            raise ConfigError("encoder_resolution must be positive")
        if self.motion_scale <= 0.0:
            raise ConfigError("motion_scale must be positive")
        if self.feedback_delay_ms < 0.0:
            raise ConfigError("feedback_delay_ms must be non-negative")
        if self.dt > 0.002:
            raise ConfigError("loop period above 2 ms breaks the integrator margin")

    @property
    def dt(self) -> float:
        return 1.0 / self.rate_hz

    @property
    def delay_ticks(self) -> int:
        return round(self.feedback_delay_ms * self.rate_hz / 1000.0)


@dataclass(frozen=True)
class ActuatorParams:
    """Cutaneous actuator: transport delay, first-order lag, saturation."""

    transport_delay_ms: float = 45.0
    time_constant_ms: float = 10.0
    max_force: float = 5.0

    def validate(self) -> None:
        if self.transport_delay_ms < 0.0:
            raise ConfigError("actuator transport delay must be non-negative")
        if self.time_constant_ms <= 0.0:
            raise ConfigError("actuator time constant must be positive")
        if self.max_force <= 0.0:
            raise ConfigError("actuator max force must be positive")


@dataclass(frozen=True)
class FeedbackParams:
    """Feedback routing constants plus the actuator model."""

    bar_full_scale: float = 3.5  # force that fills the visual bar, N
    actuator: ActuatorParams = field(default_factory=ActuatorParams)

    def validate(self) -> None:
        if self.bar_full_scale <= 0.0:
            raise ConfigError("bar_full_scale must be positive")
        self.actuator.validate()


@dataclass(frozen=True)
class OperatorParams:
    """Simulated operator: impedance hand plus intent policy constants.

    All values are hand-space. Perception delays are additional to whatever
    the feedback path (loop delay, actuator) already introduces.
    """

    hand_mass: float = 0.5          # kg
    pd_stiffness: float = 300.0     # N/m
    pd_damping: float = 25.0        # N*s/m
    insertion_speed: float = 0.01   # m/s
    extraction_speed: float = 0.02  # m/s
    stop_force_threshold: float = 1.0  # N
    perception_delay_hf_ms: float = 0.0
    perception_delay_cf_ms: float = 0.0
    perception_delay_ccf_ms: float = 20.0
    perception_delay_vf_ms: float = 250.0
    noise_std: float = 0.0          # zero-mean position noise, m (off by default)
    start_position: float = 0.0     # m
    done_tolerance: float = 2e-4    # m, hand-at-start detection

    def validate(self) -> None:
        positive = (
            "hand_mass", "pd_stiffness", "pd_damping", "insertion_speed",
            "extraction_speed", "stop_force_threshold", "done_tolerance",
        )
        for name in positive:
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"operator parameter {name} must be positive")
        for name in (
            "perception_delay_hf_ms", "perception_delay_cf_ms",
            "perception_delay_ccf_ms", "perception_delay_vf_ms", "noise_std",
        ):
            if getattr(self, name) < 0.0:
                raise ConfigError(f"operator parameter {name} must be non-negative")


@dataclass(frozen=True)
class HarnessParams:
    """Batch experiment protocol constants."""

    fixture_min: float = 0.103        # m, randomization interval
    fixture_max: float = 0.143        # m
    perturbation_increase: float = 0.030  # m added to fixture depth
    contact_beep_s: float = 5.0       # continuous fixture contact gating the beep
    trial_timeout_s: float = 60.0
    repetitions: int = 6
    seed: int = 1

    def validate(self) -> None:
        if not 0.0 < self.fixture_min <= self.fixture_max:
            raise ConfigError("fixture randomization interval is invalid")
        if self.perturbation_increase <= 0.0:
            raise ConfigError("perturbation_increase must be positive")
        if self.contact_beep_s <= 0.0 or self.trial_timeout_s <= 0.0:
            raise ConfigError("protocol timers must be positive")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be at least 1")


@dataclass(frozen=True)
class ServerParams:
    """Interactive session service configuration."""

    broadcast_hz: float = 60.0
    hand_min: float = 0.0    # m, input clamp
    hand_max: float = 0.06   # m
    input_stale_s: float = 1.0
    time_scale: float = 1.0  # sim seconds per wall second (testing/demo)

    def validate(self) -> None:
        if self.broadcast_hz <= 0.0:
            raise ConfigError("broadcast_hz must be positive")
        if self.hand_max <= self.hand_min:
            raise ConfigError("hand workspace is empty")
        if self.input_stale_s <= 0.0 or self.time_scale <= 0.0:
            raise ConfigError("input_stale_s and time_scale must be positive")


@dataclass(frozen=True)
class SimParams:
    """Everything a trial needs, grouped by subsystem."""

    tissue: TissueParams = field(default_factory=TissueParams)
    loop: LoopConfig = field(default_factory=LoopConfig)
    feedback: FeedbackParams = field(default_factory=FeedbackParams)
    operator: OperatorParams = field(default_factory=OperatorParams)
    harness: HarnessParams = field(default_factory=HarnessParams)
    server: ServerParams = field(default_factory=ServerParams)

    def validate(self) -> "SimParams":
        self.tissue.validate()
        self.loop.validate()
        self.feedback.validate()
        self.operator.validate()
        self.harness.validate()
        self.server.validate()
        return self


# Flat config keys map onto the nested dataclasses; every leaf name is unique.
_GROUPS = {
    "tissue": TissueParams,
    "loop": LoopConfig,
    "feedback": FeedbackParams,
    "operator": OperatorParams,
    "harness": HarnessParams,
    "server": ServerParams,
}


def _flat_key_index() -> dict[str, tuple[str, str]]:
    index: dict[str, tuple[str, str]] = {}
    for group, cls in _GROUPS.items():
        for f in fields(cls):
            if f.name == "actuator":
                continue
            index[f.name] = (group, f.name)
    for f in fields(ActuatorParams):
        index[f"actuator_{f.name}"] = ("feedback.actuator", f.name)
    return index


_FLAT_KEYS = _flat_key_index()


def params_from_flat(overrides: dict[str, Any], base: SimParams | None = None) -> SimParams:
    """Build SimParams from a flat key/value mapping on top of ``base``."""
    params = base or SimParams()
    grouped: dict[str, dict[str, Any]] = {}
    for key, value in overrides.items():
        if key not in _FLAT_KEYS:
            raise ConfigError(f"unknown config key: {key!r}")
        group, name = _FLAT_KEYS[key]
        grouped.setdefault(group, {})[name] = value

    actuator = params.feedback.actuator
    if "feedback.actuator" in grouped:
        actuator = replace(actuator, **grouped.pop("feedback.actuator"))
    feedback = replace(params.feedback, actuator=actuator, **grouped.pop("feedback", {}))
    params = replace(
        params,
        tissue=replace(params.tissue, **grouped.pop("tissue", {})),
        loop=replace(params.loop, **grouped.pop("loop", {})),
        feedback=feedback,
        operator=replace(params.operator, **grouped.pop("operator", {})),
        harness=replace(params.harness, **grouped.pop("harness", {})),
        server=replace(params.server, **grouped.pop("server", {})),
    )
    return params.validate()


def load_params(path: str | Path, base: SimParams | None = None) -> SimParams:
    """Load a flat JSON config file."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a flat JSON object")
    return params_from_flat(raw, base=base)


def params_to_flat(params: SimParams) -> dict[str, Any]:
    """Inverse of ``params_from_flat`` (for config echo in reports)."""
    out: dict[str, Any] = {}
    for key, (group, name) in _FLAT_KEYS.items():
        if group == "feedback.actuator":
            out[key] = getattr(params.feedback.actuator, name)
        else:
            out[key] = getattr(getattr(params, group), name)
    return out
