"""Terminal parameter sets: optics, EDFA power envelope, wavelength plan, field of regard.

Serialized units: metres, nanometres, watts, seconds, degrees.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from decimal import Decimal

from .datalink import MODEM_10G, ModemProfile

C_BAND_M = (1530e-9, 1565e-9)
DEFAULT_BAND_GAP_M = 10e-9
MARECHAL_LIMIT_WAVES = 0.25


def _m_to_nm(x: float) -> float:
    return float(Decimal(repr(x)).scaleb(9))


def _nm_to_m(x: float) -> float:
    return float(Decimal(repr(float(x))).scaleb(-9))


@dataclass(frozen=True)
class EdfaEnvelope:
    """Two-step output-power staircase versus cumulative on-time, hard cutoff after."""

    p_high_W: float = 2.0
    t_high_max_s: float = 600.0
    p_low_W: float = 1.6
    t_low_max_s: float = 3600.0

    def __post_init__(self):
        if not self.p_high_W >= self.p_low_W > 0:
            raise ValueError("EDFA envelope needs p_high >= p_low > 0")
        if not self.t_low_max_s >= self.t_high_max_s > 0:
            raise ValueError("EDFA envelope needs t_low_max >= t_high_max > 0")


@dataclass(frozen=True)
class FieldOfRegard:
    azimuth_full_deg: float = 360.0
    elevation_min_deg: float = -90.0
    elevation_max_deg: float = 90.0

    def __post_init__(self):
        if not self.elevation_min_deg < self.elevation_max_deg:
            raise ValueError("field of regard needs elevation_min < elevation_max")
        if not 0 < self.azimuth_full_deg <= 360:
            raise ValueError("azimuth coverage must be in (0, 360]")


@dataclass(frozen=True)
class TerminalProfile:
    name: str
    aperture_m: float
    optics_transmission: float = 0.93
    wavefront_error_rms_waves: float = 1.0 / 19.0
    wavelength_tx_m: float = _nm_to_m(1550)
    wavelength_rx_m: float = _nm_to_m(1560)
    wdm_channels_per_direction: int = 1
    wdm_spacing_m: float = _nm_to_m(0.8)
    tx_power_nominal_W: float = 2.0
    edfa_envelope: EdfaEnvelope = field(default_factory=EdfaEnvelope)
    field_of_regard: FieldOfRegard = field(default_factory=FieldOfRegard)
    fine_pointing_accuracy_urad: float = 1.0
    fine_loop_bandwidth_hz: float = 500.0
    coarse_fov_deg: float = 1.0
    modem: ModemProfile = MODEM_10G
    circular_polarization_compat: bool = True
    mass_kg: float | None = None
    max_range_scenario: str = ""

    def __post_init__(self):
        if not self.aperture_m > 0:
            raise ValueError("aperture_m must be > 0")
        if not 0 < self.optics_transmission <= 1:
            raise ValueError("optics_transmission must be in (0, 1]")
        if not 0 <= self.wavefront_error_rms_waves < MARECHAL_LIMIT_WAVES:
            raise ValueError("wavefront error must be in [0, 0.25) waves")
        if self.wavelength_tx_m == self.wavelength_rx_m:
            raise ValueError("tx and rx wavelengths must differ")
        if not 1 <= self.wdm_channels_per_direction <= 4:
            raise ValueError("wdm_channels_per_direction must be in [1, 4]")
        if not self.fine_pointing_accuracy_urad > 0:
            raise ValueError("fine_pointing_accuracy_urad must be > 0")
        if not self.tx_power_nominal_W > 0:
            raise ValueError("tx_power_nominal_W must be > 0")
        if not (self.fine_loop_bandwidth_hz > 0 and self.coarse_fov_deg > 0):
            raise ValueError("loop bandwidth and coarse FOV must be > 0")

    def swapped(self) -> "TerminalProfile":
        """Same terminal with transmit and receive wavelengths exchanged."""
        return replace(self, wavelength_tx_m=self.wavelength_rx_m, wavelength_rx_m=self.wavelength_tx_m)

    @property
    def data_rate_bps(self) -> float:
        return self.modem.rate_bps * self.wdm_channels_per_direction

    def tx_channels_m(self) -> list[float]:
        return [self.wavelength_tx_m + k * self.wdm_spacing_m for k in range(self.wdm_channels_per_direction)]

    def rx_channels_m(self) -> list[float]:
        return [self.wavelength_rx_m + k * self.wdm_spacing_m for k in range(self.wdm_channels_per_direction)]

    def to_dict(self) -> dict:
        e, f = self.edfa_envelope, self.field_of_regard
        return {
            "name": self.name,
            "aperture_m": self.aperture_m,
            "optics_transmission": self.optics_transmission,
            "wavefront_error_rms_waves": self.wavefront_error_rms_waves,
            "wavelength_tx_nm": _m_to_nm(self.wavelength_tx_m),
            "wavelength_rx_nm": _m_to_nm(self.wavelength_rx_m),
            "wdm_channels_per_direction": self.wdm_channels_per_direction,
            "wdm_spacing_nm": _m_to_nm(self.wdm_spacing_m),
            "tx_power_nominal_W": self.tx_power_nominal_W,
            "edfa_envelope": {
                "p_high_W": e.p_high_W,
                "t_high_max_s": e.t_high_max_s,
                "p_low_W": e.p_low_W,
                "t_low_max_s": e.t_low_max_s,
            },
            "field_of_regard": {
                "azimuth_full_deg": f.azimuth_full_deg,
                "elevation_min_deg": f.elevation_min_deg,
                "elevation_max_deg": f.elevation_max_deg,
            },
            "fine_pointing_accuracy_urad": self.fine_pointing_accuracy_urad,
            "fine_loop_bandwidth_hz": self.fine_loop_bandwidth_hz,
            "coarse_fov_deg": self.coarse_fov_deg,
            "modem": self.modem.to_dict(),
            "circular_polarization_compat": self.circular_polarization_compat,
            "mass_kg": self.mass_kg,
            "max_range_scenario": self.max_range_scenario,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TerminalProfile":
        d = dict(d)
        kw = {}
        for key in ("wavelength_tx", "wavelength_rx", "wdm_spacing"):
            if f"{key}_nm" in d:
                kw[f"{key}_m"] = _nm_to_m(d.pop(f"{key}_nm"))
        if "edfa_envelope" in d:
            kw["edfa_envelope"] = EdfaEnvelope(**d.pop("edfa_envelope"))
        if "field_of_regard" in d:
            kw["field_of_regard"] = FieldOfRegard(**d.pop("field_of_regard"))
        if "modem" in d:
            kw["modem"] = ModemProfile.from_dict(d.pop("modem"))
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown terminal fields: {sorted(unknown)}")
        kw.update(d)
        return cls(**kw)


def builtin_profiles() -> dict[str, TerminalProfile]:
    """The three optical-head configurations, keyed by name."""
    hemisphere = FieldOfRegard(360.0, -90.0, 90.0)
    return {
        "HICALI": TerminalProfile(
            name="HICALI",
            aperture_m=0.15,
            field_of_regard=FieldOfRegard(360.0, -10.0, 10.0),
            mass_kg=80.0,
            max_range_scenario="GEO-ground (2 ways)",
        ),
        "FX": TerminalProfile(
            name="FX",
            aperture_m=0.09,
            field_of_regard=hemisphere,
            mass_kg=8.0,
            max_range_scenario="LEO-GEO (1 way), LEO-LEO (2 ways)",
        ),
        "ST": TerminalProfile(
            name="ST",
            aperture_m=0.03,
            field_of_regard=hemisphere,
            mass_kg=4.0,
            max_range_scenario="LEO-ground (1 way), HAPS-ground (2 ways)",
        ),
    }


def beam_divergence(profile: TerminalProfile) -> float:
    """Diffraction-limited Gaussian far-field full angle (1/e^2), radians: 4 lambda / (pi D)."""
    if not (profile.aperture_m > 0 and profile.wavelength_tx_m > 0):
        raise ValueError("aperture and wavelength must be > 0")
    return 4.0 * profile.wavelength_tx_m / (math.pi * profile.aperture_m)


def strehl_penalty_db(wavefront_error_rms_waves: float) -> float:
    """Marechal-approximation Strehl loss in dB for an RMS wavefront error in waves."""
    s = wavefront_error_rms_waves
    if not 0 <= s < MARECHAL_LIMIT_WAVES:
        raise ValueError(f"wavefront error {s} outside Marechal validity [0, 0.25)")
    # -10 log10(exp(-x)) written without the exp/log round trip
    return 10.0 / math.log(10.0) * (2.0 * math.pi * s) ** 2


def available_tx_power(envelope: EdfaEnvelope, cumulative_on_time_s: float) -> float:
    t = cumulative_on_time_s
    if t < 0:
        raise ValueError("cumulative on-time must be >= 0")
    if t <= envelope.t_high_max_s:
        return envelope.p_high_W
    if t <= envelope.t_low_max_s:
        return envelope.p_low_W
    return 0.0


@dataclass(frozen=True)
class DuplexReport:
    ok: bool
    conflicts: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.ok


def duplex_plan_check(
    tx_a: TerminalProfile, rx_b: TerminalProfile, band_gap_m: float = DEFAULT_BAND_GAP_M
) -> DuplexReport:
    """Check that two terminals form a valid wavelength-duplexed pair."""
    conflicts: list[str] = []
    a, b = tx_a, rx_b
    if a.wavelength_tx_m != b.wavelength_rx_m:
        conflicts.append(
            f"{a.name} transmits {_m_to_nm(a.wavelength_tx_m)} nm but {b.name} receives {_m_to_nm(b.wavelength_rx_m)} nm"
        )
    if a.wavelength_rx_m != b.wavelength_tx_m:
        conflicts.append(
            f"{b.name} transmits {_m_to_nm(b.wavelength_tx_m)} nm but {a.name} receives {_m_to_nm(a.wavelength_rx_m)} nm"
        )
    gap_nm = _m_to_nm(band_gap_m)
    for t in (a, b):
        sep = min(abs(x - y) for x in t.tx_channels_m() for y in t.rx_channels_m())
        if sep < band_gap_m - 1e-15:
            conflicts.append(f"{t.name}: band gap {round(sep * 1e9, 6)} nm < {gap_nm} nm")
    lo, hi = C_BAND_M
    for t in (a, b):
        for w in t.tx_channels_m() + t.rx_channels_m():
            if not lo - 1e-15 <= w <= hi + 1e-15:
                conflicts.append(f"{t.name}: channel {round(w * 1e9, 6)} nm outside C-band [1530, 1565] nm")
    # symmetric under swapping terminals: report in a canonical order
    return DuplexReport(not conflicts, tuple(sorted(set(conflicts))))


def in_field_of_regard(fov: FieldOfRegard, azimuth_deg: float, elevation_deg: float) -> bool:
    if not (math.isfinite(azimuth_deg) and math.isfinite(elevation_deg)):
        raise ValueError("angles must be finite")
    if not fov.elevation_min_deg <= elevation_deg <= fov.elevation_max_deg:
        return False
    if fov.azimuth_full_deg >= 360.0:
        return True
    # sector centred on azimuth 0
    half = fov.azimuth_full_deg / 2.0
    az = (azimuth_deg + 180.0) % 360.0 - 180.0
    return -half <= az <= half
