"""Trial protocol: event detection and the continuous-contact beep timer.

Fixture contact means the needle is at or beyond the fixture surface. The
beep fires after an unbroken run of contact ticks spanning exactly the
configured window (5 s -> 5000 ticks at 1 kHz); any separation resets the
timer. Perturbation trials move the fixture at the beep tick.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .loop import TelemetrySample

EV_TISSUE_ENTRY = "tissue_entry"
EV_FIXTURE_FIRST_CONTACT = "fixture_first_contact"
EV_CONTINUOUS_CONTACT_START = "continuous_contact_start"
EV_BEEP = "beep"
EV_PERTURBATION = "perturbation"
EV_EXTRACTION_COMPLETE = "extraction_complete"
EV_TIMEOUT = "timeout"
EV_NON_FINITE = "non_finite_state"


@dataclass(frozen=True)
class TrialEvent:
    tick: int
    t: float
    name: str


@dataclass
class ProtocolTracker:
    rate_hz: int
    contact_beep_s: float
    events: list[TrialEvent] = field(default_factory=list)
    beep_tick: int | None = None
    _beep_window: int = field(init=False)
    _contact_start: int | None = field(init=False, default=None)
    _tissue_entered: bool = field(init=False, default=False)
    _fixture_touched: bool = field(init=False, default=False)

    def __post_init__(self):
        self._beep_window = round(self.contact_beep_s * self.rate_hz)

    def _emit(self, tick: int, name: str) -> None:
        self.events.append(TrialEvent(tick, tick / self.rate_hz, name))

    @property
    def beep_fired(self) -> bool:
        return self.beep_tick is not None

    def update(self, sample: TelemetrySample) -> list[str]:
        """Process one telemetry sample; returns event names fired this tick."""
        fired: list[str] = []
        k = sample.tick

        if not self._tissue_entered and sample.phase.value != "NoContact":
            self._tissue_entered = True
            self._emit(k, EV_TISSUE_ENTRY)
            fired.append(EV_TISSUE_ENTRY)

        if sample.fixture_contact:
            if not self._fixture_touched:
                self._fixture_touched = True
                self._emit(k, EV_FIXTURE_FIRST_CONTACT)
                fired.append(EV_FIXTURE_FIRST_CONTACT)
            if self._contact_start is None:
                self._contact_start = k
            if self.beep_tick is None and k - self._contact_start >= self._beep_window:
                self.beep_tick = k
                # The gating window start becomes definitive only now.
                self._emit(self._contact_start, EV_CONTINUOUS_CONTACT_START)
                self._emit(k, EV_BEEP)
                fired.append(EV_BEEP)
        else:
            self._contact_start = None

        return fired

    def finish(self, tick: int, *, timed_out: bool) -> None:
        self._emit(tick, EV_TIMEOUT if timed_out else EV_EXTRACTION_COMPLETE)

    def note_perturbation(self, tick: int) -> None:
        self._emit(tick, EV_PERTURBATION)

    def note_divergence(self, tick: int) -> None:
        self._emit(tick, EV_NON_FINITE)

    def sorted_events(self) -> list[TrialEvent]:
        return sorted(self.events, key=lambda e: e.tick)

    def event_tick(self, name: str) -> int | None:
        for e in self.events:
            if e.name == name:
                return e.tick
        return None
