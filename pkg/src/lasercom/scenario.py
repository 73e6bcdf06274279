"""Scenario files: strict JSON schema, semantic validation, defaults, round-trip.

File units: m, nm, W, s, degrees, bps. Values are kept in file units here and
converted to radians / metres when the geometry and terminal objects are built.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import jsonschema

from .channel import AtmosphereSpec
from .datalink import BufferSpec
from .geometry import OrbitSpec, PlatformSpec, StaticPlatformSpec, Waypoint
from .pat import DisturbanceSpec, PatConfig
from .terminal import TerminalProfile, builtin_profiles, duplex_plan_check

DEFAULT_BAND_GAP_NM = 10.0
KINDS = ("satellite", "haps", "drone", "ground")
BUILTIN_SCENARIOS = (
    "drone_trial",
    "geo_ground_hicali",
    "leo_geo_fx",
    "leo_ground_st",
    "haps_ground_st",
    "leo_leo_edfa_endurance",
)


class ScenarioError(Exception):
    """Validation failure; ``errors`` holds every (location, message) pair found."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = list(errors)
        super().__init__("\n".join(f"{loc}: {msg}" for loc, msg in self.errors))


_num = {"type": "number"}
_nonneg = {"type": "number", "minimum": 0}
_pos = {"type": "number", "exclusiveMinimum": 0}


def _obj(props: dict, required: tuple = ()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_MODEM = _obj(
    {
        "name": {"type": "string"},
        "rate_bps": _pos,
        "photons_per_bit": _pos,
        "interleaver_span_s": _pos,
        "frame_duration_s": _pos,
        "duplex": {"enum": ["one_way", "two_way"]},
    },
    ("name", "rate_bps"),
)

_TERMINAL_FIELDS = {
    "name": {"type": "string"},
    "aperture_m": _pos,
    "optics_transmission": _pos,
    "wavefront_error_rms_waves": _nonneg,
    "wavelength_tx_nm": _pos,
    "wavelength_rx_nm": _pos,
    "wdm_channels_per_direction": {"type": "integer", "minimum": 1, "maximum": 4},
    "wdm_spacing_nm": _pos,
    "tx_power_nominal_W": _pos,
    "edfa_envelope": _obj(
        {"p_high_W": _pos, "t_high_max_s": _pos, "p_low_W": _pos, "t_low_max_s": _pos}
    ),
    "field_of_regard": _obj(
        {"azimuth_full_deg": _pos, "elevation_min_deg": _num, "elevation_max_deg": _num}
    ),
    "fine_pointing_accuracy_urad": _pos,
    "fine_loop_bandwidth_hz": _pos,
    "coarse_fov_deg": _pos,
    "modem": {"oneOf": [{"type": "string"}, _MODEM]},
    "circular_polarization_compat": {"type": "boolean"},
    "mass_kg": {"type": ["number", "null"]},
    "max_range_scenario": {"type": "string"},
}

_TERMINAL = {
    "oneOf": [
        {"type": "string"},
        _obj(
            {"base": {"type": "string"}, "wavelength_plan": {"enum": ["default", "swapped"]}, **_TERMINAL_FIELDS},
            ("base",),
        ),
        _obj(_TERMINAL_FIELDS, ("name", "aperture_m")),
    ]
}

_ORBIT = _obj(
    {
        "altitude_m": _pos,
        "geostationary_longitude_deg": _num,
        "inclination_deg": _num,
        "raan_deg": _num,
        "initial_phase_deg": _num,
        "epoch_s": _num,
    }
)

_WAYPOINT = _obj(
    {"t_s": _num, "latitude_deg": _num, "longitude_deg": _num, "altitude_m": _nonneg},
    ("t_s", "latitude_deg", "longitude_deg", "altitude_m"),
)

_SITE = _obj(
    {
        "latitude_deg": _num,
        "longitude_deg": _num,
        "altitude_m": _nonneg,
        "waypoints": {"type": "array", "items": _WAYPOINT},
    },
    ("latitude_deg", "longitude_deg"),
)

_PAT = _obj(
    {
        "gps_exchange_duration_s": _pos,
        "discovery_timeout_s": _pos,
        "scan_dwell_s": _pos,
        "open_loop_uncertainty_deg": _nonneg,
        "reacquire_policy": {"enum": ["restart_coarse", "restart_fine"]},
        "beacon_divergence_factor": _pos,
        "beacon_sensitivity_dbm": _num,
    }
)

_PLATFORM = _obj(
    {
        "id": {"type": "string", "minLength": 1},
        "kind": {"enum": list(KINDS)},
        "orbit": _ORBIT,
        "site": _SITE,
        "mount": {"enum": ["zenith", "orbit_normal"]},
        "terminal": _TERMINAL,
        "atmosphere": _obj(
            {
                "zenith_attenuation_dB": _nonneg,
                "scintillation_sigma2": _nonneg,
                "correlation_time_s": _pos,
                "applies": {"type": "boolean"},
            }
        ),
        "disturbance": _obj(
            {
                "tones": {
                    "type": "array",
                    "items": {"type": "array", "items": _num, "minItems": 2, "maxItems": 2},
                },
                "white_rms_urad": _nonneg,
                "nyquist_hz": _pos,
            }
        ),
        "buffer": _obj(
            {
                "capacity_bits": {"type": "integer", "exclusiveMinimum": 0},
                "ingest_rate_bps": _nonneg,
                "initial_bits": {"type": ["integer", "null"], "minimum": 0},
            }
        ),
        "pat": _PAT,
    },
    ("id", "kind", "terminal"),
)

_LINK = _obj(
    {
        "a": {"type": "string"},
        "b": {"type": "string"},
        "direction": {"enum": ["one_way", "two_way"]},
        "min_elevation_a_deg": _num,
        "min_elevation_b_deg": _num,
    },
    ("a", "b"),
)

SCHEMA = _obj(
    {
        "name": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "band_gap_nm": _pos,
        "time": _obj({"t0_s": _num, "t1_s": _num, "dt_s": _pos}, ("t1_s", "dt_s")),
        "platforms": {"type": "array", "items": _PLATFORM, "minItems": 1},
        "links": {"type": "array", "items": _LINK},
    },
    ("name", "time", "platforms", "links"),
)


@dataclass(frozen=True)
class OrbitConfig:
    altitude_m: float | None = None
    geostationary_longitude_deg: float | None = None
    inclination_deg: float = 0.0
    raan_deg: float = 0.0
    initial_phase_deg: float = 0.0
    epoch_s: float = 0.0

    def to_spec(self) -> OrbitSpec:
        if self.geostationary_longitude_deg is not None:
            return OrbitSpec.geostationary(math.radians(self.geostationary_longitude_deg), self.epoch_s)
        return OrbitSpec(
            altitude_m=self.altitude_m,
            inclination_rad=math.radians(self.inclination_deg),
            raan_rad=math.radians(self.raan_deg),
            initial_phase_rad=math.radians(self.initial_phase_deg),
            epoch_s=self.epoch_s,
        )

    def to_dict(self) -> dict:
        d: dict[str, Any] = {}
        if self.geostationary_longitude_deg is not None:
            d["geostationary_longitude_deg"] = self.geostationary_longitude_deg
        else:
            d["altitude_m"] = self.altitude_m
        d.update(
            inclination_deg=self.inclination_deg,
            raan_deg=self.raan_deg,
            initial_phase_deg=self.initial_phase_deg,
            epoch_s=self.epoch_s,
        )
        return d


@dataclass(frozen=True)
class SiteConfig:
    latitude_deg: float
    longitude_deg: float
    altitude_m: float = 0.0
    waypoints: tuple[tuple[float, float, float, float], ...] = ()  # (t_s, lat_deg, lon_deg, alt_m)

    def to_spec(self) -> StaticPlatformSpec:
        return StaticPlatformSpec(
            latitude_rad=math.radians(self.latitude_deg),
            longitude_rad=math.radians(self.longitude_deg),
            altitude_m=self.altitude_m,
            waypoints=tuple(
                Waypoint(t, math.radians(la), math.radians(lo), h) for t, la, lo, h in self.waypoints
            ),
        )

    def to_dict(self) -> dict:
        d = {"latitude_deg": self.latitude_deg, "longitude_deg": self.longitude_deg, "altitude_m": self.altitude_m}
        if self.waypoints:
            d["waypoints"] = [
                {"t_s": t, "latitude_deg": la, "longitude_deg": lo, "altitude_m": h} for t, la, lo, h in self.waypoints
            ]
        return d


@dataclass(frozen=True)
class PatSettings:
    gps_exchange_duration_s: float = 5.0
    discovery_timeout_s: float = 60.0
    scan_dwell_s: float = 0.1
    open_loop_uncertainty_deg: float = 0.5
    reacquire_policy: str = "restart_coarse"
    beacon_divergence_factor: float = 10.0
    beacon_sensitivity_dbm: float = -70.0

    def pat_config(self, terminal: TerminalProfile) -> PatConfig:
        return PatConfig(
            coarse_fov_full_deg=terminal.coarse_fov_deg,
            fine_accuracy_urad=terminal.fine_pointing_accuracy_urad,
            loop_bandwidth_hz=terminal.fine_loop_bandwidth_hz,
            gps_exchange_duration_s=self.gps_exchange_duration_s,
            discovery_timeout_s=self.discovery_timeout_s,
            scan_dwell_s=self.scan_dwell_s,
            open_loop_uncertainty_deg=self.open_loop_uncertainty_deg,
            reacquire_policy=self.reacquire_policy,
        )

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class PlatformConfig:
    id: str
    kind: str
    terminal: TerminalProfile
    orbit: OrbitConfig | None = None
    site: SiteConfig | None = None
    mount: str = "zenith"
    atmosphere: AtmosphereSpec | None = None
    disturbance: DisturbanceSpec = field(default_factory=DisturbanceSpec)
    buffer: BufferSpec = field(default_factory=BufferSpec)
    pat: PatSettings = field(default_factory=PatSettings)

    @property
    def spec(self) -> PlatformSpec:
        return self.orbit.to_spec() if self.orbit is not None else self.site.to_spec()

    @property
    def has_atmosphere(self) -> bool:
        return self.atmosphere is not None and self.atmosphere.applies

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"id": self.id, "kind": self.kind}
        if self.orbit is not None:
            d["orbit"] = self.orbit.to_dict()
        else:
            d["site"] = self.site.to_dict()
        d["mount"] = self.mount
        d["terminal"] = self.terminal.to_dict()
        if self.atmosphere is not None:
            a = self.atmosphere
            d["atmosphere"] = {
                "zenith_attenuation_dB": a.zenith_attenuation_dB,
                "scintillation_sigma2": a.scintillation_sigma2,
                "correlation_time_s": a.correlation_time_s,
                "applies": a.applies,
            }
        ds = self.disturbance
        d["disturbance"] = {
            "tones": [[f, a] for f, a in ds.tones],
            "white_rms_urad": ds.white_rms_urad,
            "nyquist_hz": ds.nyquist_hz,
        }
        b = self.buffer
        d["buffer"] = {
            "capacity_bits": b.capacity_bits,
            "ingest_rate_bps": b.ingest_rate_bps,
            "initial_bits": b.initial_bits,
        }
        d["pat"] = self.pat.to_dict()
        return d


@dataclass(frozen=True)
class LinkConfig:
    a: str
    b: str
    direction: str = "one_way"
    min_elevation_a_deg: float = -90.0
    min_elevation_b_deg: float = -90.0

    @property
    def link_id(self) -> str:
        return f"{self.a}-{self.b}"

    def direction_ids(self) -> list[tuple[str, str, str]]:
        """(direction id, transmitter id, receiver id) for each active direction."""
        out = [(f"{self.a}-{self.b}", self.a, self.b)]
        if self.direction == "two_way":
            out.append((f"{self.b}-{self.a}", self.b, self.a))
        return out

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class TimeConfig:
    t1_s: float
    dt_s: float
    t0_s: float = 0.0

    @property
    def n_steps(self) -> int:
        return int(round((self.t1_s - self.t0_s) / self.dt_s))

    def to_dict(self) -> dict:
        return {"t0_s": self.t0_s, "t1_s": self.t1_s, "dt_s": self.dt_s}


@dataclass(frozen=True)
class Scenario:
    name: str
    platforms: tuple[PlatformConfig, ...]
    links: tuple[LinkConfig, ...]
    time: TimeConfig
    seed: int = 0
    band_gap_nm: float = DEFAULT_BAND_GAP_NM

    def platform(self, pid: str) -> PlatformConfig:
        for p in self.platforms:
            if p.id == pid:
                return p
        raise KeyError(pid)

    def link(self, link_id: str) -> LinkConfig:
        for lk in self.links:
            if link_id in (lk.link_id, f"{lk.b}-{lk.a}"):
                return lk
        raise KeyError(link_id)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "band_gap_nm": self.band_gap_nm,
            "time": self.time.to_dict(),
            "platforms": [p.to_dict() for p in self.platforms],
            "links": [lk.to_dict() for lk in self.links],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _loc(path) -> str:
    out = "$"
    for p in path:
        out += f"[{p}]" if isinstance(p, int) else f".{p}"
    return out


def _resolve_terminal(raw, errors: list, loc: str) -> TerminalProfile | None:
    builtins = builtin_profiles()
    from .datalink import BUILTIN_MODEMS

    try:
        if isinstance(raw, str):
            if raw not in builtins:
                errors.append((loc, f"unknown built-in terminal {raw!r} (known: {sorted(builtins)})"))
                return None
            return builtins[raw]
        raw = dict(raw)
        if isinstance(raw.get("modem"), str):
            name = raw["modem"]
            if name not in BUILTIN_MODEMS:
                errors.append((f"{loc}.modem", f"unknown built-in modem {name!r}"))
                return None
            raw["modem"] = BUILTIN_MODEMS[name].to_dict()
        if "base" in raw:
            base_name = raw.pop("base")
            plan = raw.pop("wavelength_plan", "default")
            if base_name not in builtins:
                errors.append((f"{loc}.base", f"unknown built-in terminal {base_name!r}"))
                return None
            base = builtins[base_name]
            if plan == "swapped":
                base = base.swapped()
            merged = base.to_dict()
            for k, v in raw.items():
                if isinstance(v, dict) and isinstance(merged.get(k), dict):
                    merged[k] = {**merged[k], **v}
                else:
                    merged[k] = v
            return TerminalProfile.from_dict(merged)
        return TerminalProfile.from_dict(raw)
    except (ValueError, TypeError) as exc:
        errors.append((loc, str(exc)))
        return None


def _build(data: dict) -> Scenario:
    errors: list[tuple[str, str]] = []
    validator = jsonschema.Draft202012Validator(SCHEMA)
    for err in sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path))):
        errors.append((_loc(err.absolute_path), err.message))
    if errors:
        raise ScenarioError(errors)

    t = data["time"]
    time = TimeConfig(t1_s=t["t1_s"], dt_s=t["dt_s"], t0_s=t.get("t0_s", 0.0))
    if not time.t1_s > time.t0_s:
        errors.append(("$.time", f"t1_s ({time.t1_s}) must be greater than t0_s ({time.t0_s})"))
    elif abs(time.n_steps * time.dt_s - (time.t1_s - time.t0_s)) > 1e-6 * time.dt_s:
        errors.append(("$.time.dt_s", "window length must be an integer number of steps"))

    platforms: list[PlatformConfig] = []
    seen: set[str] = set()
    for i, p in enumerate(data["platforms"]):
        loc = f"$.platforms[{i}]"
        pid = p["id"]
        if pid in seen:
            errors.append((f"{loc}.id", f"duplicate platform id {pid!r}"))
        seen.add(pid)
        kind = p["kind"]
        if kind == "satellite" and "orbit" not in p:
            errors.append((loc, f"satellite {pid!r} needs an 'orbit'"))
            continue
        if kind != "satellite" and "site" not in p:
            errors.append((loc, f"{kind} {pid!r} needs a 'site'"))
            continue
        if "orbit" in p and "site" in p:
            errors.append((loc, f"platform {pid!r} declares both 'orbit' and 'site'"))
            continue
        term = _resolve_terminal(p["terminal"], errors, f"{loc}.terminal")
        try:
            orbit = site = None
            if "orbit" in p:
                o = p["orbit"]
                if ("altitude_m" in o) == ("geostationary_longitude_deg" in o):
                    raise ValueError("orbit needs exactly one of altitude_m / geostationary_longitude_deg")
                orbit = OrbitConfig(**o)
                orbit.to_spec()
            else:
                s = dict(p["site"])
                wps = tuple(
                    (w["t_s"], w["latitude_deg"], w["longitude_deg"], w["altitude_m"]) for w in s.pop("waypoints", [])
                )
                site = SiteConfig(waypoints=wps, **s)
                site.to_spec()
        except (ValueError, TypeError) as exc:
            errors.append((f"{loc}.{'orbit' if 'orbit' in p else 'site'}", str(exc)))
            continue
        try:
            atm = AtmosphereSpec(**p["atmosphere"]) if "atmosphere" in p else None
            dist_raw = dict(p.get("disturbance", {}))
            if "tones" in dist_raw:
                dist_raw["tones"] = tuple(tuple(x) for x in dist_raw["tones"])
            disturbance = DisturbanceSpec(**dist_raw)
            buf = BufferSpec(**p.get("buffer", {}))
            pat = PatSettings(**p.get("pat", {}))
        except (ValueError, TypeError) as exc:
            errors.append((loc, str(exc)))
            continue
        if term is None:
            continue
        mount = p.get("mount", "orbit_normal" if kind == "satellite" else "zenith")
        if mount == "orbit_normal" and orbit is None:
            errors.append((f"{loc}.mount", "orbit_normal mount needs an orbiting platform"))
            continue
        platforms.append(
            PlatformConfig(
                id=pid,
                kind=kind,
                terminal=term,
                orbit=orbit,
                site=site,
                mount=mount,
                atmosphere=atm,
                disturbance=disturbance,
                buffer=buf,
                pat=pat,
            )
        )

    by_id = {p.id: p for p in platforms}
    band_gap_nm = data.get("band_gap_nm", DEFAULT_BAND_GAP_NM)
    links: list[LinkConfig] = []
    pairs: set[frozenset] = set()
    for i, lk in enumerate(data["links"]):
        loc = f"$.links[{i}]"
        link = LinkConfig(**lk)
        label = f"link {link.link_id}"
        missing = [x for x in (link.a, link.b) if x not in seen]
        for x in missing:
            errors.append((loc, f"{label} references undeclared platform {x!r}"))
        if missing:
            continue
        if link.a == link.b:
            errors.append((loc, f"{label} connects a platform to itself"))
            continue
        pair = frozenset((link.a, link.b))
        if pair in pairs:
            errors.append((loc, f"{label} duplicates another link between the same platforms"))
        pairs.add(pair)
        links.append(link)
        pa, pb = by_id.get(link.a), by_id.get(link.b)
        if pa is None or pb is None:
            continue
        rep = duplex_plan_check(pa.terminal, pb.terminal, band_gap_nm * 1e-9)
        for c in rep.conflicts:
            errors.append((loc, f"{label}: duplex plan conflict: {c}"))
        if link.direction == "two_way":
            for pc in (pa, pb):
                if pc.terminal.modem.duplex != "two_way":
                    errors.append((loc, f"{label} is two_way but {pc.id}'s modem is one_way"))
        if pa.terminal.data_rate_bps != pb.terminal.data_rate_bps:
            errors.append(
                (
                    loc,
                    f"{label}: data rates differ ({pa.id} {pa.terminal.data_rate_bps:g} bps, "
                    f"{pb.id} {pb.terminal.data_rate_bps:g} bps)",
                )
            )
        if pa.has_atmosphere and pb.has_atmosphere:
            errors.append((loc, f"{label}: both ends declare an atmosphere; at most one is allowed"))
        for pc, min_el in ((pa, link.min_elevation_a_deg), (pb, link.min_elevation_b_deg)):
            if pc.has_atmosphere:
                if min_el <= 5.0:
                    errors.append(
                        (loc, f"{label}: min elevation at {pc.id} ({min_el} deg) must exceed the 5 deg airmass limit")
                    )
                atm = pc.atmosphere
                if atm.scintillation_sigma2 > 0 and time.dt_s > atm.correlation_time_s / 2:
                    errors.append(
                        (
                            "$.time.dt_s",
                            f"dt_s = {time.dt_s} exceeds correlation_time_s / 2 = {atm.correlation_time_s / 2} "
                            f"(correlation_time_s = {atm.correlation_time_s} at {pc.id}, {label})",
                        )
                    )
    if errors:
        raise ScenarioError(errors)
    return Scenario(
        name=data["name"],
        platforms=tuple(platforms),
        links=tuple(links),
        time=time,
        seed=data.get("seed", 0),
        band_gap_nm=band_gap_nm,
    )


def load_scenario_dict(data: dict) -> Scenario:
    return _build(copy.deepcopy(data))


def load_scenario(text: str) -> Scenario:
    """Parse and validate scenario text. Raises ScenarioError listing every problem."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError([(f"line {exc.lineno}, column {exc.colno}", exc.msg)]) from None
    if not isinstance(data, dict):
        raise ScenarioError([("$", "scenario must be a JSON object")])
    return _build(data)


def builtin_scenario_text(name: str) -> str:
    if name not in BUILTIN_SCENARIOS:
        raise KeyError(f"unknown built-in scenario {name!r}")
    return resources.files("lasercom").joinpath("scenarios", f"{name}.json").read_text()


def read_scenario(path_or_name: str) -> Scenario:
    """Load a scenario file, or a built-in one given as ``builtin:<name>``."""
    if path_or_name.startswith("builtin:"):
        return load_scenario(builtin_scenario_text(path_or_name.split(":", 1)[1]))
    return load_scenario(Path(path_or_name).read_text())
