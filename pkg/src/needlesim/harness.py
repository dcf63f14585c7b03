"""Batch experiment harness: trial protocol, metrics, aggregation, export.

Experiments:
  exp1  N repetitions x 4 modalities, no feedback delay
  exp2  exp1 plus a fixture perturbation fired together with the beep
  exp3  exp1 with 50 ms feedback delay

Trials are independent and deterministic; a run is reproducible byte for
byte from (master seed, trial index), serial or parallel. Telemetry rows
are the canonical record: the penetration-relevant columns are rounded to
the CSV precision (9 significant digits) before metrics are computed, so
re-deriving the aggregates from the exported CSV is exact.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import find_peaks

from .feedback import Modality
from .loop import HapticLoop
from .operator import SimulatedOperator
from .params import SimParams, params_to_flat
from .protocol import (
    EV_BEEP,
    EV_FIXTURE_FIRST_CONTACT,
    EV_PERTURBATION,
    EV_TISSUE_ENTRY,
    ProtocolTracker,
    TrialEvent,
)
from .tissue import NonFiniteStateError

EXPERIMENTS = ("exp1", "exp2", "exp3")

# Column layout of TrialRecord.data rows; row index == tick.
HAND_Z, Z_N, Z_T, Z_VF, F_H, F_VF, KIN, IDX_STRESS, THB_STRESS, BAR, APP_IDX, APP_THB, PHASE, INTENT = range(14)

_PHASE_NAMES = ("NoContact", "ContactNoPenetration", "Penetration")
_PHASE_CODE = {name: float(i) for i, name in enumerate(_PHASE_NAMES)}
_INTENT_NAMES = ("Inserting", "Holding", "Extracting", "Done")
_INTENT_CODE = {name: float(i) for i, name in enumerate(_INTENT_NAMES)}
_NO_INTENT = -1.0  # replayed / interactive records carry no operator intent

OSCILLATION_PROMINENCE = 5e-4  # m, needle space

CSV_HEADER = (
    "trial,modality,rep,tick,t,hand_z,z_n,z_t,z_vf,f_h,f_vf,kinesthetic,"
    "index_stress,thumb_stress,visual_bar,applied_index,applied_thumb,"
    "target_hand,phase,intent,event"
)


class MissingEventError(ValueError):
    """The record lacks an event the computation needs."""


@dataclass(frozen=True)
class Perturbation:
    new_depth: float  # m; applied at the beep tick


@dataclass(frozen=True)
class TrialConfig:
    modality: Modality
    fixture_depth: float
    feedback_delay_ms: float = 0.0
    perturbation: Perturbation | None = None
    seed: int = 1
    trial_index: int = 0
    rep: int = 0
    timeout_s: float = 60.0

    def validate(self) -> None:
        if self.perturbation is not None and self.perturbation.new_depth <= self.fixture_depth:
            raise ValueError("perturbation must move the fixture deeper")
        if self.timeout_s <= 0.0:
            raise ValueError("timeout must be positive")


@dataclass
class TrialRecord:
    config: TrialConfig
    rate_hz: int
    data: np.ndarray  # (n_ticks, 14), columns as above
    events: list[TrialEvent]
    target_hand: str
    timed_out: bool
    diverged: bool = False  # integration left the finite range (flagged, not fatal)

    @property
    def n_ticks(self) -> int:
        return self.data.shape[0]

    def event_tick(self, name: str) -> int | None:
        for e in self.events:
            if e.name == name:
                return e.tick
        return None

    def times(self) -> np.ndarray:
        return np.arange(self.n_ticks) / self.rate_hz


@dataclass(frozen=True)
class TrialMetrics:
    avg_penetration: float          # m
    max_penetration: float          # m
    completion_time: float | None   # s, beep - tissue entry; None without a beep
    delta_p: float | None           # m, perturbation trials only
    oscillation_peaks: int
    oscillation_amplitude: float    # m, mean height of counted peaks
    timed_out: bool


def _round_sig9(column: np.ndarray) -> np.ndarray:
    return np.array([float(f"{v:.9g}") for v in column.tolist()])


def _canonicalize(data: np.ndarray) -> np.ndarray:
    # Metrics read z_n and z_vf; pin them to the exported precision.
    data[:, Z_N] = _round_sig9(data[:, Z_N])
    data[:, Z_VF] = _round_sig9(data[:, Z_VF])
    return data


def run_trial(params: SimParams, config: TrialConfig) -> TrialRecord:
    """Execute the full protocol with the simulated operator."""
    config.validate()
    loop = HapticLoop(params, config.modality, config.fixture_depth, config.feedback_delay_ms)
    rng = None
    if params.operator.noise_std > 0.0:
        rng = np.random.default_rng([config.seed, config.trial_index, 1])
    operator = SimulatedOperator(
        params.operator, config.modality, loop.rate_hz,
        params.feedback.bar_full_scale, rng,
    )
    tracker = ProtocolTracker(loop.rate_hz, params.harness.contact_beep_s)

    max_ticks = round(config.timeout_s * loop.rate_hz)
    rows = []
    timed_out = True
    diverged = False
    target_hand = "dominant"
    for k in range(max_ticks):
        try:
            sample = loop.tick(operator.hand_command())
        except NonFiniteStateError:
            # Integration blow-up guard: flag the record, keep what we have.
            timed_out = False
            diverged = True
            tracker.note_divergence(k)
            break
        fired = tracker.update(sample)
        if EV_BEEP in fired and config.perturbation is not None:
            loop.set_fixture_depth(config.perturbation.new_depth)
            tracker.note_perturbation(sample.tick)
        perceived = operator.perceive(sample)
        operator.act(perceived, sample.kinesthetic, tracker.beep_fired)
        target_hand = sample.target_hand
        rows.append((
            sample.hand_z, sample.z_n, sample.z_t, sample.z_vf,
            sample.f_h, sample.f_vf, sample.kinesthetic,
            sample.index_stress, sample.thumb_stress, sample.visual_bar,
            sample.applied_index, sample.applied_thumb,
            _PHASE_CODE[sample.phase.value], _INTENT_CODE[operator.intent.value],
        ))
        if operator.done:
            timed_out = False
            break
    tracker.finish(max(len(rows) - 1, 0), timed_out=timed_out)

    data = _canonicalize(np.array(rows) if rows else np.empty((0, 14)))
    return TrialRecord(config, loop.rate_hz, data, tracker.sorted_events(),
                       target_hand, timed_out, diverged)


def replay_inputs(
    params: SimParams, config: TrialConfig, inputs: Sequence[float]
) -> TrialRecord:
    """Run a recorded hand-input stream through the batch tick path.

    Produces telemetry bit-identical to an interactive session that served
    the same per-tick inputs under the same configuration.
    """
    config.validate()
    loop = HapticLoop(params, config.modality, config.fixture_depth, config.feedback_delay_ms)
    tracker = ProtocolTracker(loop.rate_hz, params.harness.contact_beep_s)
    rows = []
    target_hand = "dominant"
    for hand_z in inputs:
        sample = loop.tick(hand_z)
        fired = tracker.update(sample)
        if EV_BEEP in fired and config.perturbation is not None:
            loop.set_fixture_depth(config.perturbation.new_depth)
            tracker.note_perturbation(sample.tick)
        target_hand = sample.target_hand
        rows.append((
            sample.hand_z, sample.z_n, sample.z_t, sample.z_vf,
            sample.f_h, sample.f_vf, sample.kinesthetic,
            sample.index_stress, sample.thumb_stress, sample.visual_bar,
            sample.applied_index, sample.applied_thumb,
            _PHASE_CODE[sample.phase.value], _NO_INTENT,
        ))
    tracker.finish(max(len(rows) - 1, 0), timed_out=tracker.beep_tick is None)

    data = _canonicalize(np.array(rows) if rows else np.empty((0, 14)))
    return TrialRecord(config, loop.rate_hz, data, tracker.sorted_events(),
                       target_hand, tracker.beep_tick is None)


def penetration_series(record: TrialRecord, *, current_depth: bool = True) -> np.ndarray:
    """p(t) = max(0, z_n - z_vf); against the initial depth when requested.

    Depths come from the canonical record columns, never the raw config, so
    re-deriving the metric from the exported CSV is exact.
    """
    depth = record.data[:, Z_VF] if current_depth else record.data[0, Z_VF]
    return np.maximum(0.0, record.data[:, Z_N] - depth)


def count_oscillation_peaks(
    p: np.ndarray, start: int, end: int | None = None,
    prominence: float = OSCILLATION_PROMINENCE,
) -> tuple[int, float]:
    """Alternating penetration peaks above the prominence floor in [start, end)."""
    window = p[start:end]
    if len(window) < 3:
        return 0, 0.0
    peaks, _ = find_peaks(window, prominence=prominence)
    if len(peaks) == 0:
        return 0, 0.0
    return int(len(peaks)), float(np.mean(window[peaks]))


def holding_onset(record: TrialRecord) -> int | None:
    holding = np.nonzero(record.data[:, INTENT] == _INTENT_CODE["Holding"])[0]
    return int(holding[0]) if len(holding) else None


def compute_metrics(record: TrialRecord) -> TrialMetrics:
    """Penetration, timing and oscillation statistics for one trial."""
    fixture_tick = record.event_tick(EV_FIXTURE_FIRST_CONTACT)
    if fixture_tick is None:
        raise MissingEventError("trial never touched the fixture")
    beep_tick = record.event_tick(EV_BEEP)
    entry_tick = record.event_tick(EV_TISSUE_ENTRY)

    p = penetration_series(record)
    contact = record.data[:, Z_N] >= record.data[:, Z_VF]

    avg_end = beep_tick + 1 if beep_tick is not None else record.n_ticks
    window = p[:avg_end][contact[:avg_end]]
    avg_penetration = float(np.mean(window)) if len(window) else 0.0
    max_penetration = float(np.max(p))

    completion_time = None
    if beep_tick is not None and entry_tick is not None:
        completion_time = (beep_tick - entry_tick) / record.rate_hz

    delta_p = None
    pert_tick = record.event_tick(EV_PERTURBATION)
    if pert_tick is not None:
        p_ref = penetration_series(record, current_depth=False)
        pre = p_ref[max(0, pert_tick - round(5.0 * record.rate_hz)):pert_tick]
        delta_p = float(np.max(p_ref[pert_tick:]) - np.mean(pre))

    osc_start = holding_onset(record)
    if osc_start is None:
        osc_start = fixture_tick
    osc_end = beep_tick + 1 if beep_tick is not None else record.n_ticks
    n_peaks, amplitude = count_oscillation_peaks(p, osc_start, osc_end)

    return TrialMetrics(
        avg_penetration=avg_penetration,
        max_penetration=max_penetration,
        completion_time=completion_time,
        delta_p=delta_p,
        oscillation_peaks=n_peaks,
        oscillation_amplitude=amplitude,
        timed_out=record.timed_out,
    )


def normalize_trajectory(record: TrialRecord) -> np.ndarray:
    """Time re-based to fixture entry; positions as % of the initial depth.

    Returns an (n, 3) array of (t_rel, needle_pct, tissue_pct) where the
    rest surface maps to 0% and the initial fixture depth to 100%.
    """
    fixture_tick = record.event_tick(EV_FIXTURE_FIRST_CONTACT)
    if fixture_tick is None:
        raise MissingEventError("trial never touched the fixture")
    rest = record.data[0, Z_T]
    span = record.data[0, Z_VF] - rest
    t_rel = (np.arange(record.n_ticks) - fixture_tick) / record.rate_hz
    needle_pct = (record.data[:, Z_N] - rest) / span * 100.0
    tissue_pct = (record.data[:, Z_T] - rest) / span * 100.0
    return np.column_stack([t_rel, needle_pct, tissue_pct])


@dataclass
class TrialResult:
    config: TrialConfig
    record: TrialRecord
    metrics: TrialMetrics | None
    error: str | None = None


@dataclass
class ExperimentReport:
    name: str
    seed: int
    repetitions: int
    feedback_delay_ms: float
    params_flat: dict
    results: list[TrialResult] = field(default_factory=list)

    def aggregates(self) -> dict:
        by_modality: dict[str, dict] = {}
        for modality in Modality:
            rs = [r for r in self.results if r.config.modality is modality]
            if not rs:
                continue
            ms = [r.metrics for r in rs if r.metrics is not None]
            entry: dict = {
                "n": len(rs),
                "n_completed": sum(1 for m in ms if m.completion_time is not None),
                "timeouts": sum(1 for m in ms if m.timed_out),
                "errors": sum(1 for r in rs if r.error is not None),
            }
            entry["avg_penetration"] = _mean_sd([m.avg_penetration for m in ms])
            entry["max_penetration"] = _mean_sd([m.max_penetration for m in ms])
            entry["completion_time"] = _mean_sd(
                [m.completion_time for m in ms if m.completion_time is not None]
            )
            entry["oscillation_peaks"] = _mean_sd([float(m.oscillation_peaks) for m in ms])
            entry["oscillation_amplitude"] = _mean_sd([m.oscillation_amplitude for m in ms])
            deltas = [m.delta_p for m in ms if m.delta_p is not None]
            entry["delta_p"] = _mean_sd(deltas) if deltas else None
            by_modality[modality.value] = entry
        return {
            "experiment": self.name,
            "seed": self.seed,
            "repetitions": self.repetitions,
            "feedback_delay_ms": self.feedback_delay_ms,
            "config": self.params_flat,
            "modalities": by_modality,
        }


def _mean_sd(values: list[float]) -> dict:
    if not values:
        return {"mean": None, "sd": None, "n": 0}
    arr = np.asarray(values)
    sd = float(np.std(arr, ddof=1)) if len(arr) > 1 else 0.0
    return {"mean": float(np.mean(arr)), "sd": sd, "n": len(arr)}


def fixture_depth_for(seed: int, trial_index: int, params: SimParams) -> float:
    rng = np.random.default_rng([seed, trial_index])
    return float(rng.uniform(params.harness.fixture_min, params.harness.fixture_max))


def build_trials(
    name: str,
    params: SimParams,
    *,
    seed: int | None = None,
    repetitions: int | None = None,
    feedback_delay_ms: float | None = None,
    modalities: Iterable[Modality] | None = None,
    timeout_s: float | None = None,
) -> list[TrialConfig]:
    if name not in EXPERIMENTS:
        raise ValueError(f"unknown experiment {name!r}; expected one of {EXPERIMENTS}")
    seed = params.harness.seed if seed is None else seed
    reps = params.harness.repetitions if repetitions is None else repetitions
    if feedback_delay_ms is None:
        feedback_delay_ms = 50.0 if name == "exp3" else params.loop.feedback_delay_ms
    modalities = list(modalities) if modalities is not None else list(Modality)
    timeout_s = params.harness.trial_timeout_s if timeout_s is None else timeout_s

    trials = []
    index = 0
    for modality in modalities:
        for rep in range(reps):
            depth = fixture_depth_for(seed, index, params)
            perturbation = None
            if name == "exp2":
                perturbation = Perturbation(depth + params.harness.perturbation_increase)
            trials.append(TrialConfig(
                modality=modality,
                fixture_depth=depth,
                feedback_delay_ms=feedback_delay_ms,
                perturbation=perturbation,
                seed=seed,
                trial_index=index,
                rep=rep,
                timeout_s=timeout_s,
            ))
            index += 1
    return trials


def _run_one(args: tuple[SimParams, TrialConfig]) -> TrialResult:
    params, config = args
    record = run_trial(params, config)
    if record.diverged:
        return TrialResult(config, record, None, error="non-finite state during integration")
    try:
        metrics = compute_metrics(record)
        return TrialResult(config, record, metrics)
    except MissingEventError as exc:
        return TrialResult(config, record, None, error=str(exc))


def run_experiment(
    name: str,
    params: SimParams,
    *,
    seed: int | None = None,
    repetitions: int | None = None,
    feedback_delay_ms: float | None = None,
    modalities: Iterable[Modality] | None = None,
    timeout_s: float | None = None,
    workers: int = 1,
) -> ExperimentReport:
    """Run one experiment; trial order (and output bytes) are seed-determined.

    Trials are independent, so ``workers > 1`` fans them out over processes;
    results are merged back in trial order, keeping outputs byte-identical
    to a serial run.
    """
    trials = build_trials(
        name, params, seed=seed, repetitions=repetitions,
        feedback_delay_ms=feedback_delay_ms, modalities=modalities, timeout_s=timeout_s,
    )
    report = ExperimentReport(
        name=name,
        seed=trials[0].seed if trials else (seed or params.harness.seed),
        repetitions=repetitions if repetitions is not None else params.harness.repetitions,
        feedback_delay_ms=trials[0].feedback_delay_ms if trials else 0.0,
        params_flat=params_to_flat(params),
    )
    jobs = [(params, t) for t in trials]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            report.results = list(pool.map(_run_one, jobs))
    else:
        report.results = [_run_one(j) for j in jobs]
    return report


# ---------------------------------------------------------------------------
# export

def _fmt(x: float) -> str:
    return f"{x:.9g}"


def write_trials_csv(report: ExperimentReport, path: Path) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER.split(","))
        for result in report.results:
            rec = result.record
            cfg = result.config
            event_map: dict[int, list[str]] = {}
            for e in rec.events:
                event_map.setdefault(e.tick, []).append(e.name)
            rate = rec.rate_hz
            for tick, row in enumerate(rec.data):
                intent_code = int(row[INTENT])
                writer.writerow((
                    cfg.trial_index, cfg.modality.value, cfg.rep, tick, _fmt(tick / rate),
                    _fmt(row[HAND_Z]), _fmt(row[Z_N]), _fmt(row[Z_T]), _fmt(row[Z_VF]),
                    _fmt(row[F_H]), _fmt(row[F_VF]), _fmt(row[KIN]),
                    _fmt(row[IDX_STRESS]), _fmt(row[THB_STRESS]), _fmt(row[BAR]),
                    _fmt(row[APP_IDX]), _fmt(row[APP_THB]),
                    rec.target_hand,
                    _PHASE_NAMES[int(row[PHASE])],
                    _INTENT_NAMES[intent_code] if intent_code >= 0 else "",
                    "|".join(event_map.get(tick, ())),
                ))


def write_trajectories_csv(report: ExperimentReport, path: Path) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("trial", "modality", "rep", "t", "needle_pct", "tissue_pct"))
        for result in report.results:
            if result.error is not None:
                continue
            traj = normalize_trajectory(result.record)
            cfg = result.config
            for t_rel, needle_pct, tissue_pct in traj:
                writer.writerow((
                    cfg.trial_index, cfg.modality.value, cfg.rep,
                    _fmt(t_rel), _fmt(needle_pct), _fmt(tissue_pct),
                ))


def write_aggregates_json(report: ExperimentReport, path: Path) -> None:
    path.write_text(
        json.dumps(report.aggregates(), indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )


def write_outputs(report: ExperimentReport, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "trials": out / "trials.csv",
        "aggregates": out / "aggregates.json",
        "trajectories": out / "trajectories_normalized.csv",
    }
    write_trials_csv(report, paths["trials"])
    write_aggregates_json(report, paths["aggregates"])
    write_trajectories_csv(report, paths["trajectories"])
    return paths


def write_record_csv(record: TrialRecord, path: Path) -> None:
    """Single-trial dump in the trials.csv schema (interactive sessions)."""
    report = ExperimentReport(
        name="session", seed=record.config.seed, repetitions=1,
        feedback_delay_ms=record.config.feedback_delay_ms, params_flat={},
        results=[TrialResult(record.config, record, None)],
    )
    write_trials_csv(report, path)
