"""Pointing, acquisition and tracking (PAT) state machine and fine-loop jitter model."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

from scipy.integrate import quad

_TIME_EPS = 1e-9


class Phase(str, enum.Enum):
    IDLE = "Idle"
    GPS_EXCHANGE = "GpsExchange"
    DISCOVERY = "Discovery"
    COARSE_ACQUISITION = "CoarseAcquisition"
    FINE_TRACKING = "FineTracking"
    COMMUNICATING = "Communicating"
    LOST_TRACK = "LostTrack"

    def __str__(self) -> str:
        return self.value


TRACKING_PHASES = frozenset({Phase.COARSE_ACQUISITION, Phase.FINE_TRACKING, Phase.COMMUNICATING})

# progress order used when summarising two link ends; LostTrack ranks lowest
PHASE_RANK = {
    Phase.LOST_TRACK: 0,
    Phase.IDLE: 1,
    Phase.GPS_EXCHANGE: 2,
    Phase.DISCOVERY: 3,
    Phase.COARSE_ACQUISITION: 4,
    Phase.FINE_TRACKING: 5,
    Phase.COMMUNICATING: 6,
}


@dataclass(frozen=True)
class PatConfig:
    coarse_fov_full_deg: float = 1.0
    fine_accuracy_urad: float = 1.0
    loop_bandwidth_hz: float = 500.0
    gps_exchange_duration_s: float = 5.0
    discovery_timeout_s: float = 60.0
    scan_dwell_s: float = 0.1
    open_loop_uncertainty_deg: float = 0.5
    reacquire_policy: str = "restart_coarse"

    def __post_init__(self):
        for name in ("coarse_fov_full_deg", "gps_exchange_duration_s", "discovery_timeout_s", "scan_dwell_s"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not (self.fine_accuracy_urad > 0 and self.loop_bandwidth_hz > 0):
            raise ValueError("fine accuracy and loop bandwidth must be > 0")
        if self.open_loop_uncertainty_deg < 0:
            raise ValueError("open-loop uncertainty must be >= 0")
        if self.reacquire_policy not in ("restart_coarse", "restart_fine"):
            raise ValueError(f"unknown reacquire_policy {self.reacquire_policy!r}")


@dataclass(frozen=True)
class PatState:
    phase: Phase = Phase.IDLE
    phase_entry_time_s: float = 0.0
    residual_jitter_rms_urad: float | None = None
    open_loop_uncertainty_rad: float = 0.0
    time_s: float = 0.0
    scan_elapsed_s: float = 0.0

    def __post_init__(self):
        if self.open_loop_uncertainty_rad < 0:
            raise ValueError("open-loop uncertainty must be >= 0")
        tracking = self.phase in (Phase.FINE_TRACKING, Phase.COMMUNICATING)
        if tracking != (self.residual_jitter_rms_urad is not None):
            raise ValueError(f"residual jitter defined iff fine tracking, phase={self.phase}")


@dataclass(frozen=True)
class PatInputs:
    visible: bool
    peer_position_known: bool = True
    beacon_detected: bool = False
    in_field_of_regard: bool = True
    residual_jitter_urad: float = 0.0
    commanded: bool = True


@dataclass(frozen=True)
class PatEvent:
    time_s: float
    from_phase: Phase
    to_phase: Phase
    reason: str


def coarse_scan_time(uncertainty_full_deg: float, fov_full_deg: float, dwell_s: float) -> float:
    """Spiral-scan time: cell count from the area ratio, +20% overlap, rounded up."""
    if not (uncertainty_full_deg > 0 and fov_full_deg > 0 and dwell_s > 0):
        raise ValueError("scan parameters must be > 0")
    return scan_cells(uncertainty_full_deg, fov_full_deg) * dwell_s


def scan_cells(uncertainty_full_deg: float, fov_full_deg: float) -> int:
    if uncertainty_full_deg <= fov_full_deg:
        return 1
    area = math.ceil((uncertainty_full_deg / fov_full_deg) ** 2 - 1e-9)
    return math.ceil(area * 1.2 - 1e-9)


def _required_scan_s(state: PatState, config: PatConfig) -> float:
    unc_deg = math.degrees(state.open_loop_uncertainty_rad)
    if unc_deg <= 0:
        return config.scan_dwell_s
    return coarse_scan_time(unc_deg, config.coarse_fov_full_deg, config.scan_dwell_s)


def command(state: PatState, t_s: float) -> tuple[PatState, list[PatEvent]]:
    """Command a link: Idle -> GpsExchange at ``t_s``."""
    if state.phase != Phase.IDLE:
        return state, []
    new = PatState(Phase.GPS_EXCHANGE, t_s, None, state.open_loop_uncertainty_rad, t_s)
    return new, [PatEvent(t_s, Phase.IDLE, Phase.GPS_EXCHANGE, "link commanded")]


def step(
    state: PatState, config: PatConfig, inputs: PatInputs, dt_s: float, t_s: float | None = None
) -> tuple[PatState, list[PatEvent]]:
    """Advance the state machine by ``dt_s``.

    ``t_s`` optionally pins the end-of-step time so callers on a fixed grid
    do not accumulate rounding from repeated addition.

    Several transitions may fire in one step when their conditions already
    hold (e.g. beacon present on entering coarse acquisition); timed phases
    only exit once their duration has elapsed.
    """
    if not dt_s > 0:
        raise ValueError("dt must be > 0")
    t = state.time_s + dt_s if t_s is None else t_s
    events: list[PatEvent] = []
    s = replace(state, time_s=t)
    if s.phase == Phase.DISCOVERY and inputs.visible and inputs.in_field_of_regard:
        s = replace(s, scan_elapsed_s=s.scan_elapsed_s + dt_s)

    def go(to: Phase, reason: str, **kw) -> None:
        nonlocal s
        jitter = inputs.residual_jitter_urad if to in (Phase.FINE_TRACKING, Phase.COMMUNICATING) else None
        events.append(PatEvent(t, s.phase, to, reason))
        s = PatState(
            phase=to,
            phase_entry_time_s=t,
            residual_jitter_rms_urad=jitter,
            open_loop_uncertainty_rad=kw.get("uncertainty", s.open_loop_uncertainty_rad),
            time_s=t,
            scan_elapsed_s=0.0,
        )

    for _ in range(len(Phase) + 1):
        before = s.phase
        ph = s.phase
        if ph == Phase.IDLE:
            if inputs.commanded:
                go(Phase.GPS_EXCHANGE, "link commanded")
        elif ph == Phase.GPS_EXCHANGE:
            if inputs.peer_position_known and t - s.phase_entry_time_s >= config.gps_exchange_duration_s - _TIME_EPS:
                go(Phase.DISCOVERY, "peer position exchanged",
                   uncertainty=math.radians(config.open_loop_uncertainty_deg))
        elif ph == Phase.DISCOVERY:
            # the scan clock only runs while the peer is visible and reachable
            if not (inputs.visible and inputs.in_field_of_regard):
                pass
            elif s.scan_elapsed_s >= _required_scan_s(s, config) - _TIME_EPS:
                go(Phase.COARSE_ACQUISITION, "peer inside coarse field of view",
                   uncertainty=min(s.open_loop_uncertainty_rad, math.radians(config.coarse_fov_full_deg) / 2))
            elif s.scan_elapsed_s >= config.discovery_timeout_s - _TIME_EPS:
                go(Phase.GPS_EXCHANGE, "discovery timeout")
        elif ph in TRACKING_PHASES:
            if not inputs.visible:
                go(Phase.LOST_TRACK, "line of sight lost")
            elif not inputs.in_field_of_regard:
                go(Phase.LOST_TRACK, "peer left field of regard")
            elif ph == Phase.COARSE_ACQUISITION:
                if inputs.beacon_detected:
                    go(Phase.FINE_TRACKING, "beacon detected")
            elif not inputs.beacon_detected:
                go(Phase.LOST_TRACK, "beacon lost")
            elif ph == Phase.FINE_TRACKING:
                if inputs.residual_jitter_urad <= config.fine_accuracy_urad:
                    go(Phase.COMMUNICATING, "residual within fine accuracy")
                else:
                    s = replace(s, residual_jitter_rms_urad=inputs.residual_jitter_urad)
            else:  # Communicating
                if inputs.residual_jitter_urad > config.fine_accuracy_urad:
                    go(Phase.FINE_TRACKING, "residual above fine accuracy")
                else:
                    s = replace(s, residual_jitter_rms_urad=inputs.residual_jitter_urad)
        elif ph == Phase.LOST_TRACK:
            if inputs.visible and inputs.in_field_of_regard:
                if config.reacquire_policy == "restart_fine":
                    go(Phase.COARSE_ACQUISITION, "reacquire (restart_fine)")
                else:
                    go(Phase.DISCOVERY, "reacquire (restart_coarse)",
                       uncertainty=math.radians(config.open_loop_uncertainty_deg))
        # LostTrack is held for the rest of the step it was entered in
        if s.phase == before or s.phase == Phase.LOST_TRACK:
            break
    return s, events


@dataclass
class PatMachine:
    """Single-owner wrapper keeping state and event log for one link end."""

    config: PatConfig
    state: PatState = field(default_factory=PatState)
    events: list[PatEvent] = field(default_factory=list)

    def command(self, t_s: float) -> list[PatEvent]:
        self.state = replace(self.state, time_s=t_s)
        self.state, ev = command(self.state, t_s)
        self.events.extend(ev)
        return ev

    def step(self, inputs: PatInputs, dt_s: float, t_s: float | None = None) -> list[PatEvent]:
        self.state, ev = step(self.state, self.config, inputs, dt_s, t_s)
        self.events.extend(ev)
        return ev


# ---------------------------------------------------------------------------
# fine-loop residual


@dataclass(frozen=True)
class DisturbanceSpec:
    tones: tuple[tuple[float, float], ...] = ()  # (frequency_hz, amplitude_urad)
    white_rms_urad: float = 0.0
    nyquist_hz: float = 5000.0

    def __post_init__(self):
        tones = tuple((float(f), float(a)) for f, a in self.tones)
        for f, a in tones:
            if not f > 0:
                raise ValueError("disturbance frequencies must be > 0")
            if a < 0:
                raise ValueError("disturbance amplitudes must be >= 0")
        if self.white_rms_urad < 0 or not self.nyquist_hz > 0:
            raise ValueError("white level must be >= 0 and nyquist > 0")
        object.__setattr__(self, "tones", tones)


def first_order_sensitivity(f_hz: float, f_c_hz: float) -> float:
    """|S(f)| of a single-pole loop with -3 dB closed-loop bandwidth f_c."""
    x = f_hz / f_c_hz
    return x / math.sqrt(1.0 + x * x)


def fine_loop_residual(
    disturbance: DisturbanceSpec,
    loop_bandwidth_hz: float,
    sensitivity: Callable[[float, float], float] = first_order_sensitivity,
) -> float:
    """Residual RMS pointing error (urad) after the fine loop."""
    if not loop_bandwidth_hz > 0:
        raise ValueError("loop bandwidth must be > 0")
    var = 0.0
    for f, amp in disturbance.tones:
        var += (amp * sensitivity(f, loop_bandwidth_hz)) ** 2 / 2.0
    if disturbance.white_rms_urad > 0:
        fn = disturbance.nyquist_hz
        frac, _ = quad(lambda f: sensitivity(f, loop_bandwidth_hz) ** 2, 0.0, fn, limit=200)
        var += disturbance.white_rms_urad**2 * frac / fn
    return math.sqrt(var)


def acquisition_time(trace: Iterable[PatEvent]) -> float | None:
    """Seconds from the first link command to the first Communicating entry, else None."""
    t_cmd = None
    for ev in trace:
        if t_cmd is None:
            if ev.from_phase == Phase.IDLE and ev.to_phase == Phase.GPS_EXCHANGE:
                t_cmd = ev.time_s
        elif ev.to_phase == Phase.COMMUNICATING:
            return ev.time_s - t_cmd
    return None


def summarise_phases(phases: Sequence[Phase]) -> Phase:
    """Link-level phase: the least advanced end (LostTrack dominates)."""
    return min(phases, key=PHASE_RANK.__getitem__)
