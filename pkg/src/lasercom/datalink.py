"""Modem abstraction, interleaved-FEC frame decisions and the store-and-forward buffer.

FEC plus interleaving is reduced to one rule: a span of frames decodes when
the mean *linear* margin across the interleaver span is at least unity
(0 dB). Fades much shorter than the span are averaged out; long fades are not.

Bit counts are Python integers so that buffer accounting is exact.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import kernels

_ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class ModemProfile:
    name: str
    rate_bps: float
    photons_per_bit: float = 300.0
    interleaver_span_s: float = 1.0
    frame_duration_s: float = 0.01
    duplex: str = "two_way"

    def __post_init__(self):
        if not self.rate_bps > 0:
            raise ValueError("modem rate_bps must be > 0")
        if not self.photons_per_bit > 0:
            raise ValueError("photons_per_bit must be > 0")
        if not self.frame_duration_s > 0:
            raise ValueError("frame_duration_s must be > 0")
        if self.interleaver_span_s < self.frame_duration_s:
            raise ValueError("interleaver span must be >= frame duration")
        if self.duplex not in ("one_way", "two_way"):
            raise ValueError(f"duplex must be one_way or two_way, got {self.duplex!r}")

    @property
    def frames_per_span(self) -> int:
        return max(1, round(self.interleaver_span_s / self.frame_duration_s))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModemProfile":
        return cls(**d)


MODEM_10G = ModemProfile("10G", rate_bps=10e9)
# coherent 100's-Gbit/s class: only its rate and sensitivity are modelled
MODEM_100G = ModemProfile("100G", rate_bps=100e9, photons_per_bit=100.0)

BUILTIN_MODEMS = {m.name: m for m in (MODEM_10G, MODEM_100G)}


def frame_success(margin_series_db: Sequence[float]) -> bool:
    """Decode decision for one interleaver span of uniformly sampled margins."""
    m = np.asarray(margin_series_db, dtype=np.float64)
    if m.size == 0:
        raise ValueError("margin series must be non-empty")
    return bool(kernels.span_linear_means(np.ascontiguousarray(m), m.size)[0] >= 1.0)


@dataclass
class DeliveryRecord:
    frame_times_s: np.ndarray
    frame_ok: np.ndarray
    bits_per_frame: int
    delivered_bits: int = 0
    dropped_bits: int = 0
    availability: float = 0.0

    @property
    def bits_delivered(self) -> np.ndarray:
        return np.where(self.frame_ok, self.bits_per_frame, 0)

    def totals(self) -> dict:
        return {
            "delivered_bits": self.delivered_bits,
            "dropped_bits": self.dropped_bits,
            "availability": self.availability,
            "frames": int(self.frame_ok.size),
        }


def _ratio(a: float, b: float, what: str) -> int:
    k = round(a / b)
    if k < 1 or abs(k * b - a) > _ALIGN_TOL * max(a, 1.0):
        raise ValueError(f"{what}: {a} is not an integer multiple of {b}")
    return k


def frame_margins(margin_series_db: Sequence[float], dt_s: float, frame_duration_s: float) -> np.ndarray:
    """Resample a margin series (sample-and-hold, step ``dt_s``) onto the frame grid.

    Either the frame is a multiple of ``dt_s`` (frames average their samples
    in linear units) or ``dt_s`` is a multiple of the frame (samples repeat).
    """
    m = np.asarray(margin_series_db, dtype=np.float64)
    if dt_s >= frame_duration_s - _ALIGN_TOL:
        k = _ratio(dt_s, frame_duration_s, "sample step vs frame")
        return np.repeat(m, k)
    k = _ratio(frame_duration_s, dt_s, "frame vs sample step")
    n = (m.size // k) * k
    lin = kernels.span_linear_means(np.ascontiguousarray(m[:n]), k)
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(lin)


def simulate_delivery(
    margin_series_db: Sequence[float],
    modem: ModemProfile,
    channels: int = 1,
    dt_s: float | None = None,
) -> DeliveryRecord:
    """Frame-level delivery over a margin time series.

    ``dt_s`` defaults to the modem frame duration (one sample per frame).
    Every frame in a decoded interleaver span carries
    ``rate * channels * frame_duration`` bits; frames in failed spans are dropped.
    """
    if not 1 <= channels <= 4:
        raise ValueError(f"channels must be in [1, 4], got {channels}")
    dt = modem.frame_duration_s if dt_s is None else dt_s
    fm = frame_margins(margin_series_db, dt, modem.frame_duration_s)
    n_frames = fm.size
    bits_per_frame = int(round(modem.rate_bps * channels * modem.frame_duration_s))
    if n_frames == 0:
        return DeliveryRecord(np.empty(0), np.zeros(0, dtype=bool), bits_per_frame)
    span = modem.frames_per_span
    span_ok = kernels.span_linear_means(np.ascontiguousarray(fm), span) >= 1.0
    ok = np.repeat(span_ok, span)[:n_frames]
    n_ok = int(np.count_nonzero(ok))
    return DeliveryRecord(
        frame_times_s=np.arange(n_frames) * modem.frame_duration_s,
        frame_ok=ok,
        bits_per_frame=bits_per_frame,
        delivered_bits=n_ok * bits_per_frame,
        dropped_bits=(n_frames - n_ok) * bits_per_frame,
        availability=n_ok / n_frames,
    )


@dataclass(frozen=True)
class BufferSpec:
    capacity_bits: int = 6_000_000_000_000  # 10 Gbit/s over a ~600 s pass
    ingest_rate_bps: float = 0.0
    initial_bits: int | None = None  # None: start full

    def __post_init__(self):
        if not self.capacity_bits > 0:
            raise ValueError("buffer capacity must be > 0")
        if self.ingest_rate_bps < 0:
            raise ValueError("ingest rate must be >= 0")
        if self.initial_bits is not None and not 0 <= self.initial_bits <= self.capacity_bits:
            raise ValueError("initial_bits must lie in [0, capacity]")

    @property
    def start_bits(self) -> int:
        return int(self.capacity_bits if self.initial_bits is None else self.initial_bits)


@dataclass
class BufferState:
    capacity_bits: int
    occupancy_bits: int = 0
    ingested_bits: int = 0
    delivered_bits: int = 0
    dropped_bits: int = 0
    history: list = field(default_factory=list, repr=False)

    @classmethod
    def from_spec(cls, spec: BufferSpec) -> "BufferState":
        return cls(capacity_bits=int(spec.capacity_bits), occupancy_bits=spec.start_bits)


def buffer_step(state: BufferState, ingest_bits: int, delivered_bits: int) -> tuple[BufferState, int, int]:
    """Advance the buffer by one interval.

    Delivery is served from what is stored plus what arrives in the interval;
    arrivals that do not fit are dropped. Returns (new state, dropped, delivered).
    """
    ingest = int(ingest_bits)
    request = int(delivered_bits)
    if ingest < 0 or request < 0:
        raise ValueError("bit counts must be >= 0")
    available = state.occupancy_bits + ingest
    delivered = min(request, available)
    remaining = available - delivered
    dropped = max(0, remaining - state.capacity_bits)
    occupancy = remaining - dropped
    new = BufferState(
        capacity_bits=state.capacity_bits,
        occupancy_bits=occupancy,
        ingested_bits=state.ingested_bits + ingest,
        delivered_bits=state.delivered_bits + delivered,
        dropped_bits=state.dropped_bits + dropped,
    )
    return new, dropped, delivered


def ingest_for_step(rate_bps: float, step_index: int, dt_s: float) -> int:
    """Integer bits generated during step ``step_index``; cumulative totals never drift."""
    return math.floor(rate_bps * (step_index + 1) * dt_s) - math.floor(rate_bps * step_index * dt_s)
