"""Deterministic 1-dof teleoperated needle insertion simulator."""

from .feedback import CutaneousActuator, FeedbackCommand, Modality, route_force
from .harness import (
    ExperimentReport,
    MissingEventError,
    Perturbation,
    TrialConfig,
    TrialMetrics,
    TrialRecord,
    compute_metrics,
    normalize_trajectory,
    replay_inputs,
    run_experiment,
    run_trial,
    write_outputs,
)
from .loop import DelayLine, HapticLoop, TelemetrySample, quantize_position, scale_to_virtual
from .operator import Intent, SimulatedOperator
from .params import (
    ActuatorParams,
    ConfigError,
    FeedbackParams,
    HarnessParams,
    LoopConfig,
    OperatorParams,
    ServerParams,
    SimParams,
    TissueParams,
    load_params,
    params_from_flat,
)
from .tissue import (
    ContactPhase,
    NeedleState,
    NonFiniteStateError,
    TissueModel,
    TissueState,
    classify_phase,
    fixture_force,
)

__all__ = [
    "ActuatorParams",
    "ConfigError",
    "ContactPhase",
    "CutaneousActuator",
    "DelayLine",
    "ExperimentReport",
    "FeedbackCommand",
    "FeedbackParams",
    "HapticLoop",
    "HarnessParams",
    "Intent",
    "LoopConfig",
    "MissingEventError",
    "Modality",
    "NeedleState",
    "NonFiniteStateError",
    "OperatorParams",
    "Perturbation",
    "ServerParams",
    "SimParams",
    "SimulatedOperator",
    "TelemetrySample",
    "TissueModel",
    "TissueParams",
    "TissueState",
    "TrialConfig",
    "TrialMetrics",
    "TrialRecord",
    "classify_phase",
    "compute_metrics",
    "fixture_force",
    "load_params",
    "normalize_trajectory",
    "params_from_flat",
    "quantize_position",
    "replay_inputs",
    "route_force",
    "run_experiment",
    "run_trial",
    "scale_to_virtual",
    "write_outputs",
]
