"""Link budget ledger and atmospheric channel models.

Loss terms are stored in the ledger as signed contributions (losses negative)
so that ``tx_power_dBm + sum(values) == rx_power_dBm``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from . import kernels
from .datalink import ModemProfile
from .geometry import LineOfSight
from .terminal import TerminalProfile, beam_divergence, strehl_penalty_db

PLANCK = 6.62607015e-34
SPEED_OF_LIGHT = 299_792_458.0
MIN_AIRMASS_ELEVATION_RAD = math.radians(5.0)

_NORMAL = NormalDist()


@dataclass(frozen=True)
class AtmosphereSpec:
    zenith_attenuation_dB: float = 1.0
    scintillation_sigma2: float = 0.0
    correlation_time_s: float = 1e-3
    applies: bool = True

    def __post_init__(self):
        if self.zenith_attenuation_dB < 0:
            raise ValueError("zenith attenuation must be >= 0")
        if self.scintillation_sigma2 < 0:
            raise ValueError("scintillation sigma2 must be >= 0")
        if not self.correlation_time_s > 0:
            raise ValueError("correlation time must be > 0")


VACUUM = AtmosphereSpec(0.0, 0.0, 1.0, applies=False)


@dataclass(frozen=True)
class ChannelSample:
    time_s: float = 0.0
    fade_dB: float = 0.0
    attenuation_dB: float = 0.0
    blocked: bool = False

    def __post_init__(self):
        if self.attenuation_dB < 0:
            raise ValueError("attenuation must be >= 0")


@dataclass
class LinkBudget:
    terms: list[tuple[str, float]]
    tx_power_dBm: float
    rx_power_dBm: float
    required_power_dBm: float
    margin_dB: float
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        # list of pairs keeps term order through any JSON library
        return {
            "tx_power_dBm": self.tx_power_dBm,
            "terms": [{"name": n, "value_dB": v} for n, v in self.terms],
            "rx_power_dBm": self.rx_power_dBm,
            "required_power_dBm": self.required_power_dBm,
            "margin_dB": self.margin_dB,
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def table(self) -> str:
        rows = [("tx_power", f"{self.tx_power_dBm:+.3f} dBm")]
        rows += [(n, f"{v:+.3f} dB") for n, v in self.terms]
        rows += [
            ("rx_power", f"{self.rx_power_dBm:+.3f} dBm"),
            ("required_power", f"{self.required_power_dBm:+.3f} dBm"),
            ("margin", f"{self.margin_dB:+.3f} dB"),
        ]
        w = max(len(r[0]) for r in rows)
        return "\n".join(f"{n:<{w}}  {v:>14}" for n, v in rows)


def watts_to_dbm(p_W: float) -> float:
    return 10.0 * math.log10(p_W * 1e3)


def geometric_coupling_db(divergence_full_rad: float, range_m: float, rx_aperture_m: float) -> float:
    """Flat-top far-field footprint capture loss, clipped at full capture."""
    if not (divergence_full_rad > 0 and range_m > 0 and rx_aperture_m > 0):
        raise ValueError("divergence, range and aperture must all be > 0")
    footprint = divergence_full_rad * range_m
    frac = min(1.0, (rx_aperture_m / footprint) ** 2)
    return -10.0 * math.log10(frac)


def pointing_loss_db(jitter_rms_rad: float, divergence_full_rad: float) -> float:
    """Mean coupling loss of a Gaussian beam under 2-D Gaussian pointing jitter."""
    if not divergence_full_rad > 0:
        raise ValueError("divergence must be > 0")
    if jitter_rms_rad < 0:
        raise ValueError("jitter must be >= 0")
    return 10.0 * math.log10(1.0 + 8.0 * (jitter_rms_rad / divergence_full_rad) ** 2)


def atmospheric_attenuation_db(spec: AtmosphereSpec, elevation_rad: float) -> float:
    """Plane-parallel airmass scaling of the zenith attenuation."""
    if not spec.applies:
        return 0.0
    if elevation_rad <= MIN_AIRMASS_ELEVATION_RAD:
        raise ValueError(
            f"elevation {math.degrees(elevation_rad):.3f} deg is at or below the 5 deg airmass limit"
        )
    return spec.zenith_attenuation_dB / math.sin(elevation_rad)


class FadingProcess:
    """Log-normal irradiance with a first-order Gauss-Markov log-amplitude.

    ln I = x - sigma^2/2 with x a stationary AR(1) sequence of variance sigma^2
    and lag-k correlation exp(-k dt / tau). The generator state is owned by
    the instance; normals are drawn in blocks so the output does not depend
    on how callers batch their requests.
    """

    def __init__(self, spec: AtmosphereSpec, dt_s: float, seed, block: int = 4096):
        self.sigma2 = spec.scintillation_sigma2 if spec.applies else 0.0
        self.sigma = math.sqrt(self.sigma2)
        self.a = math.exp(-dt_s / spec.correlation_time_s)
        self.c = self.sigma * math.sqrt(1.0 - self.a * self.a)
        self.rng = np.random.Generator(np.random.PCG64(seed))
        self._x = 0.0
        self._started = False
        self._block = block
        self._buf = np.empty(0)
        self._pos = 0

    def log_irradiance(self, n: int) -> np.ndarray:
        if self.sigma2 == 0.0:
            return np.zeros(n)
        z = self.rng.standard_normal(n)
        x = kernels.ar1_filter(z, self.a, self.c, self._x, not self._started, self.sigma)
        if n:
            self._x = float(x[-1])
            self._started = True
        return x - self.sigma2 / 2.0

    def fade_db(self, n: int) -> np.ndarray:
        ln_i = self.log_irradiance(n)
        if self.sigma2 == 0.0:
            return ln_i  # exact zeros
        return -10.0 / math.log(10.0) * ln_i

    def next_fade_db(self) -> float:
        if self.sigma2 == 0.0:
            return 0.0
        if self._pos >= self._buf.size:
            self._buf = self.fade_db(self._block)
            self._pos = 0
        v = float(self._buf[self._pos])
        self._pos += 1
        return v


def sample_fading(spec: AtmosphereSpec, duration_s: float, dt_s: float, seed) -> np.ndarray:
    """Fade series in dB (positive = loss), ``round(duration/dt)`` samples."""
    if not duration_s > 0:
        raise ValueError("duration must be > 0")
    if dt_s > spec.correlation_time_s / 2 + 1e-15:
        raise ValueError(f"dt {dt_s} s exceeds half the correlation time {spec.correlation_time_s} s")
    n = int(round(duration_s / dt_s))
    return FadingProcess(spec, dt_s, seed).fade_db(n)


def outage_probability(margin_dB: float, sigma2: float) -> float:
    """P(fade_dB > margin) under the stationary log-normal law."""
    if sigma2 < 0:
        raise ValueError("sigma2 must be >= 0")
    if sigma2 == 0:
        return 0.0 if margin_dB > 0 else 1.0 if margin_dB < 0 else 0.0
    s = math.sqrt(sigma2)
    return _NORMAL.cdf((-margin_dB * math.log(10.0) / 10.0 + sigma2 / 2.0) / s)


def receiver_sensitivity(modem: ModemProfile, wavelength_m: float = 1550e-9) -> float:
    """Required received power (dBm) for the modem's per-channel rate."""
    if not modem.rate_bps > 0:
        raise ValueError("modem rate must be > 0")
    photon_energy = PLANCK * SPEED_OF_LIGHT / wavelength_m
    return watts_to_dbm(modem.photons_per_bit * photon_energy * modem.rate_bps)


def compute_link_budget(
    tx: TerminalProfile,
    rx: TerminalProfile,
    los: LineOfSight,
    atmosphere: AtmosphereSpec = VACUUM,
    channel: ChannelSample | None = None,
    tx_power_W: float | None = None,
    tx_jitter_urad: float | None = None,
    rx_jitter_urad: float | None = None,
    atmosphere_elevation_rad: float | None = None,
    divergence_rad: float | None = None,
) -> LinkBudget:
    """Itemised budget from transmit power to margin over the receiver sensitivity.

    Per-end jitter defaults to each profile's fine-pointing accuracy; the two
    ends are combined in quadrature. The atmosphere elevation defaults to the
    elevation seen from the ground-side endpoint. With several WDM channels the
    transmit power is split evenly and each channel must close on its own.
    """
    if not los.visible:
        raise ValueError("link budget requested for an invisible line of sight")
    p_tx = tx.tx_power_nominal_W if tx_power_W is None else tx_power_W
    if not p_tx > 0:
        raise ValueError("tx power must be > 0")
    ch = channel if channel is not None else ChannelSample()
    theta = beam_divergence(tx) if divergence_rad is None else divergence_rad
    jt = (tx.fine_pointing_accuracy_urad if tx_jitter_urad is None else tx_jitter_urad) * 1e-6
    jr = (rx.fine_pointing_accuracy_urad if rx_jitter_urad is None else rx_jitter_urad) * 1e-6
    el = los.elevation_rad if atmosphere_elevation_rad is None else atmosphere_elevation_rad

    terms: list[tuple[str, float]] = []
    n_ch = tx.wdm_channels_per_direction
    if n_ch > 1:
        terms.append(("wdm_power_split", -10.0 * math.log10(n_ch)))
    terms += [
        ("tx_optics", 10.0 * math.log10(tx.optics_transmission)),
        ("tx_strehl_marechal", -strehl_penalty_db(tx.wavefront_error_rms_waves)),
        ("geometric_flat_top", -geometric_coupling_db(theta, los.range_m, rx.aperture_m)),
        ("pointing_gaussian", -pointing_loss_db(math.hypot(jt, jr), theta)),
        ("atmosphere_airmass", -atmospheric_attenuation_db(atmosphere, el)),
        ("scintillation_fade", 0.0 - ch.fade_dB if atmosphere.applies else 0.0),
        ("rx_optics", 10.0 * math.log10(rx.optics_transmission)),
        ("rx_strehl_marechal", -strehl_penalty_db(rx.wavefront_error_rms_waves)),
    ]
    tx_dbm = watts_to_dbm(p_tx)
    rx_dbm = tx_dbm
    for _, v in terms:
        rx_dbm += v
    req = receiver_sensitivity(rx.modem, rx.wavelength_rx_m)
    return LinkBudget(
        terms=terms,
        tx_power_dBm=tx_dbm,
        rx_power_dBm=rx_dbm,
        required_power_dBm=req,
        margin_dB=rx_dbm - req,
        notes={"divergence_rad": theta, "range_m": los.range_m},
    )
