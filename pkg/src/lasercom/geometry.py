"""Platform kinematics, line-of-sight geometry, pass prediction and point-ahead.

Frames: positions and velocities are Earth-centred Earth-fixed (ECEF) on a
spherical, uniformly rotating Earth. The Earth rotation angle is zero at
t = 0, so ECI and ECEF coincide at the simulation origin.

All angles are radians internally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
from scipy.optimize import minimize_scalar

EARTH_RADIUS_M = 6_378_137.0
MU_EARTH = 3.986004418e14  # m^3 s^-2
EARTH_ROTATION_RADPS = 7.2921159e-5  # sidereal
SPEED_OF_LIGHT = 299_792_458.0

# radius at which a circular equatorial orbit matches Earth rotation exactly
GEOSTATIONARY_RADIUS_M = (MU_EARTH / EARTH_ROTATION_RADPS**2) ** (1.0 / 3.0)

Vec3 = tuple[float, float, float]


def _sub(a: Vec3, b: Vec3) -> Vec3:
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def _dot(a: Vec3, b: Vec3) -> float:
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def _cross(a: Vec3, b: Vec3) -> Vec3:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def _norm(a: Vec3) -> float:
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


def _scale(a: Vec3, k: float) -> Vec3:
    return (a[0] * k, a[1] * k, a[2] * k)


def _check_finite(**values: float) -> None:
    for name, v in values.items():
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class OrbitSpec:
    """Circular two-body orbit (eccentricity fixed at zero)."""

    altitude_m: float
    inclination_rad: float = 0.0
    raan_rad: float = 0.0
    initial_phase_rad: float = 0.0
    epoch_s: float = 0.0

    def __post_init__(self):
        _check_finite(
            altitude_m=self.altitude_m,
            inclination_rad=self.inclination_rad,
            raan_rad=self.raan_rad,
            initial_phase_rad=self.initial_phase_rad,
            epoch_s=self.epoch_s,
        )
        if self.altitude_m <= 0:
            raise ValueError(f"altitude_m must be > 0, got {self.altitude_m}")

    @classmethod
    def geostationary(cls, longitude_rad: float = 0.0, epoch_s: float = 0.0) -> "OrbitSpec":
        """Equatorial orbit whose mean motion equals the Earth rotation rate."""
        # phase at epoch such that the sub-satellite longitude is `longitude_rad`
        phase = longitude_rad + EARTH_ROTATION_RADPS * epoch_s
        return cls(
            altitude_m=GEOSTATIONARY_RADIUS_M - EARTH_RADIUS_M,
            initial_phase_rad=phase,
            epoch_s=epoch_s,
        )

    @property
    def semi_major_axis_m(self) -> float:
        return EARTH_RADIUS_M + self.altitude_m

    @property
    def mean_motion_radps(self) -> float:
        return math.sqrt(MU_EARTH / self.semi_major_axis_m**3)

    @property
    def period_s(self) -> float:
        return 2.0 * math.pi / self.mean_motion_radps

    @property
    def speed_mps(self) -> float:
        return math.sqrt(MU_EARTH / self.semi_major_axis_m)


@dataclass(frozen=True)
class Waypoint:
    time_s: float
    latitude_rad: float
    longitude_rad: float
    altitude_m: float

    def __post_init__(self):
        _check_finite(
            time_s=self.time_s,
            latitude_rad=self.latitude_rad,
            longitude_rad=self.longitude_rad,
            altitude_m=self.altitude_m,
        )
        if abs(self.latitude_rad) > math.pi / 2:
            raise ValueError("waypoint latitude outside [-pi/2, pi/2]")
        if self.altitude_m < 0:
            raise ValueError("waypoint altitude must be >= 0")


@dataclass(frozen=True)
class StaticPlatformSpec:
    """Earth-fixed platform (ground station, HAPS) or a waypoint-driven one (drone).

    With waypoints, the position is interpolated linearly in ECEF between
    consecutive time tags and held at the first/last waypoint outside the
    tagged interval.
    """

    latitude_rad: float
    longitude_rad: float
    altitude_m: float = 0.0
    waypoints: tuple[Waypoint, ...] = ()

    def __post_init__(self):
        _check_finite(
            latitude_rad=self.latitude_rad,
            longitude_rad=self.longitude_rad,
            altitude_m=self.altitude_m,
        )
        if abs(self.latitude_rad) > math.pi / 2:
            raise ValueError(f"|latitude| must be <= pi/2, got {self.latitude_rad}")
        if self.altitude_m < 0:
            raise ValueError(f"altitude_m must be >= 0, got {self.altitude_m}")
        wps = tuple(self.waypoints)
        times = [w.time_s for w in wps]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise ValueError("waypoint times must be strictly increasing")
        object.__setattr__(self, "waypoints", wps)


PlatformSpec = Union[OrbitSpec, StaticPlatformSpec]


@dataclass(frozen=True)
class PlatformState:
    """Kinematic state at one instant.

    ``velocity_mps`` is relative to the rotating Earth; ``inertial_velocity_mps``
    is the inertial velocity expressed along the same (instantaneous) ECEF axes.
    """

    position_m: Vec3
    velocity_mps: Vec3
    time_s: float
    inertial_velocity_mps: Vec3 = (0.0, 0.0, 0.0)

    def __post_init__(self):
        if _norm(self.position_m) < EARTH_RADIUS_M - 1.0:
            raise ValueError("platform position is below the Earth surface")


def geodetic_to_ecef(latitude_rad: float, longitude_rad: float, altitude_m: float) -> Vec3:
    r = EARTH_RADIUS_M + altitude_m
    cl = math.cos(latitude_rad)
    return (r * cl * math.cos(longitude_rad), r * cl * math.sin(longitude_rad), r * math.sin(latitude_rad))


def _earth_rate_cross(r: Vec3) -> Vec3:
    # omega x r with omega along +z
    return (-EARTH_ROTATION_RADPS * r[1], EARTH_ROTATION_RADPS * r[0], 0.0)


def _propagate_orbit(orbit: OrbitSpec, t: float) -> PlatformState:
    a = orbit.semi_major_axis_m
    n = orbit.mean_motion_radps
    u = orbit.initial_phase_rad + n * (t - orbit.epoch_s)
    cu, su = math.cos(u), math.sin(u)
    co, so = math.cos(orbit.raan_rad), math.sin(orbit.raan_rad)
    ci, si = math.cos(orbit.inclination_rad), math.sin(orbit.inclination_rad)

    x = a * (co * cu - so * su * ci)
    y = a * (so * cu + co * su * ci)
    z = a * (su * si)
    an = a * n
    vx = an * (-co * su - so * cu * ci)
    vy = an * (-so * su + co * cu * ci)
    vz = an * (cu * si)

    th = EARTH_ROTATION_RADPS * t
    ct, st = math.cos(th), math.sin(th)
    pos = (ct * x + st * y, -st * x + ct * y, z)
    v_in = (ct * vx + st * vy, -st * vx + ct * vy, vz)
    wr = _earth_rate_cross(pos)
    vel = (v_in[0] - wr[0], v_in[1] - wr[1], v_in[2])
    return PlatformState(pos, vel, t, v_in)


def _propagate_static(spec: StaticPlatformSpec, t: float) -> PlatformState:
    wps = spec.waypoints
    if not wps:
        pos = geodetic_to_ecef(spec.latitude_rad, spec.longitude_rad, spec.altitude_m)
        return PlatformState(pos, (0.0, 0.0, 0.0), t, _earth_rate_cross(pos))
    if t <= wps[0].time_s or len(wps) == 1:
        w = wps[0] if t <= wps[0].time_s else wps[-1]
        pos = geodetic_to_ecef(w.latitude_rad, w.longitude_rad, w.altitude_m)
        return PlatformState(pos, (0.0, 0.0, 0.0), t, _earth_rate_cross(pos))
    if t >= wps[-1].time_s:
        w = wps[-1]
        pos = geodetic_to_ecef(w.latitude_rad, w.longitude_rad, w.altitude_m)
        return PlatformState(pos, (0.0, 0.0, 0.0), t, _earth_rate_cross(pos))
    times = [w.time_s for w in wps]
    # bisect for the segment containing t
    lo, hi = 0, len(times) - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if times[mid] <= t:
            lo = mid
        else:
            hi = mid
    w0, w1 = wps[lo], wps[hi]
    p0 = geodetic_to_ecef(w0.latitude_rad, w0.longitude_rad, w0.altitude_m)
    p1 = geodetic_to_ecef(w1.latitude_rad, w1.longitude_rad, w1.altitude_m)
    span = w1.time_s - w0.time_s
    f = (t - w0.time_s) / span
    d = _sub(p1, p0)
    pos = (p0[0] + f * d[0], p0[1] + f * d[1], p0[2] + f * d[2])
    vel = _scale(d, 1.0 / span)
    wr = _earth_rate_cross(pos)
    return PlatformState(pos, vel, t, (vel[0] + wr[0], vel[1] + wr[1], vel[2]))


def propagate(spec: PlatformSpec, t: float) -> PlatformState:
    """State of a platform at time ``t`` (seconds)."""
    if not math.isfinite(t):
        raise ValueError(f"t must be finite, got {t!r}")
    if isinstance(spec, OrbitSpec):
        if t < spec.epoch_s:
            raise ValueError(f"t={t} precedes orbit epoch {spec.epoch_s}")
        return _propagate_orbit(spec, t)
    return _propagate_static(spec, t)


@dataclass(frozen=True)
class LineOfSight:
    """Geometry of the chord from endpoint ``a`` to endpoint ``b``.

    ``transverse_velocity_mps`` uses the inertial relative velocity, which is
    what drives the point-ahead angle.
    """

    range_m: float
    elevation_a_rad: float
    elevation_b_rad: float
    azimuth_a_rad: float
    azimuth_b_rad: float
    range_rate_mps: float
    transverse_velocity_mps: float
    los_angular_rate_radps: float
    visible: bool
    blocked: bool
    direction: Vec3 = field(default=(0.0, 0.0, 0.0), repr=False)

    @property
    def elevation_rad(self) -> float:
        """Elevation seen from the endpoint nearer the Earth's centre (the 'ground' side)."""
        return max(self.elevation_a_rad, self.elevation_b_rad)


def _local_east_north(r: Vec3) -> tuple[Vec3, Vec3]:
    up = _scale(r, 1.0 / _norm(r))
    east = _cross((0.0, 0.0, 1.0), up)
    ne = _norm(east)
    if ne < 1e-12:  # pole: any horizontal reference works
        east = (0.0, 1.0, 0.0)
    else:
        east = _scale(east, 1.0 / ne)
    north = _cross(up, east)
    return east, north


def _azimuth(r: Vec3, u: Vec3) -> float:
    east, north = _local_east_north(r)
    return math.atan2(_dot(u, east), _dot(u, north)) % (2.0 * math.pi)


def chord_blocked(pa: Vec3, pb: Vec3) -> bool:
    """True when the open segment between ``pa`` and ``pb`` passes below the Earth sphere."""
    d = _sub(pb, pa)
    dd = _dot(d, d)
    s = -_dot(pa, d) / dd
    if s <= 0.0 or s >= 1.0:
        return False
    closest = (pa[0] + s * d[0], pa[1] + s * d[1], pa[2] + s * d[2])
    return _norm(closest) < EARTH_RADIUS_M - 1e-6


def line_of_sight(
    a: PlatformState,
    b: PlatformState,
    min_elevation_a: float = -math.pi / 2,
    min_elevation_b: float = -math.pi / 2,
) -> LineOfSight:
    if a.time_s != b.time_s:
        raise ValueError(f"states at different times: {a.time_s} vs {b.time_s}")
    d = _sub(b.position_m, a.position_m)
    rng = _norm(d)
    if rng < 1e-9:
        raise ValueError("coincident platform positions")
    u = _scale(d, 1.0 / rng)
    ra = a.position_m
    rb = b.position_m
    el_a = math.asin(max(-1.0, min(1.0, _dot(u, ra) / _norm(ra))))
    el_b = math.asin(max(-1.0, min(1.0, -_dot(u, rb) / _norm(rb))))
    az_a = _azimuth(ra, u)
    az_b = _azimuth(rb, _scale(u, -1.0))

    vrel = _sub(b.inertial_velocity_mps, a.inertial_velocity_mps)
    rr = _dot(vrel, u)
    vt = _sub(vrel, _scale(u, rr))
    vt_mag = _norm(vt)

    blocked = chord_blocked(ra, rb)
    visible = (not blocked) and el_a >= min_elevation_a and el_b >= min_elevation_b
    return LineOfSight(
        range_m=rng,
        elevation_a_rad=el_a,
        elevation_b_rad=el_b,
        azimuth_a_rad=az_a,
        azimuth_b_rad=az_b,
        range_rate_mps=rr,
        transverse_velocity_mps=vt_mag,
        los_angular_rate_radps=vt_mag / rng,
        visible=visible,
        blocked=blocked,
        direction=u,
    )


def mount_angles(state: PlatformState, direction: Vec3, mount: str) -> tuple[float, float]:
    """Azimuth/elevation (radians) of a unit ``direction`` in a terminal's mount frame.

    ``zenith`` mounts use the local horizon (ground stations, HAPS, drones).
    ``orbit_normal`` mounts spin in azimuth about the orbit normal, so the
    elevation is the angle out of the orbital plane; nadir lies at elevation 0.
    """
    r = state.position_m
    if mount == "zenith":
        up = _scale(r, 1.0 / _norm(r))
        el = math.asin(max(-1.0, min(1.0, _dot(direction, up))))
        return _azimuth(r, direction), el
    if mount == "orbit_normal":
        h = _cross(r, state.inertial_velocity_mps)
        hn = _norm(h)
        if hn < 1e-9:
            raise ValueError("orbit normal undefined for a platform without inertial motion")
        h = _scale(h, 1.0 / hn)
        nadir = _scale(r, -1.0 / _norm(r))
        along = _cross(h, _scale(nadir, -1.0))
        el = math.asin(max(-1.0, min(1.0, _dot(direction, h))))
        az = math.atan2(_dot(direction, along), _dot(direction, nadir)) % (2.0 * math.pi)
        return az, el
    raise ValueError(f"unknown mount {mount!r}")


def point_ahead(transverse_velocity_mps: float) -> float:
    """Point-ahead angle in microradians, first-order 2 v_t / c."""
    if transverse_velocity_mps < 0:
        raise ValueError("transverse velocity must be >= 0")
    return 2.0 * transverse_velocity_mps / SPEED_OF_LIGHT * 1e6


# ---------------------------------------------------------------------------
# vectorised sampling used by pass prediction


def positions_batch(spec: PlatformSpec, times: np.ndarray) -> np.ndarray:
    """ECEF positions, shape (len(times), 3)."""
    t = np.asarray(times, dtype=float)
    if isinstance(spec, OrbitSpec):
        if np.any(t < spec.epoch_s):
            raise ValueError("sample times precede orbit epoch")
        a = spec.semi_major_axis_m
        u = spec.initial_phase_rad + spec.mean_motion_radps * (t - spec.epoch_s)
        cu, su = np.cos(u), np.sin(u)
        co, so = math.cos(spec.raan_rad), math.sin(spec.raan_rad)
        ci, si = math.cos(spec.inclination_rad), math.sin(spec.inclination_rad)
        x = a * (co * cu - so * su * ci)
        y = a * (so * cu + co * su * ci)
        z = a * (su * si)
        th = EARTH_ROTATION_RADPS * t
        ct, st = np.cos(th), np.sin(th)
        return np.stack([ct * x + st * y, -st * x + ct * y, z], axis=1)
    if not spec.waypoints:
        p = geodetic_to_ecef(spec.latitude_rad, spec.longitude_rad, spec.altitude_m)
        return np.tile(np.array(p), (t.size, 1))
    return np.array([propagate(spec, float(ti)).position_m for ti in t])


def visibility_batch(
    spec_a: PlatformSpec,
    spec_b: PlatformSpec,
    times: np.ndarray,
    min_elevation_a: float,
    min_elevation_b: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(visible, elevation_a, elevation_b) sampled at ``times``."""
    pa = positions_batch(spec_a, times)
    pb = positions_batch(spec_b, times)
    d = pb - pa
    rng = np.linalg.norm(d, axis=1)
    u = d / rng[:, None]
    ra = np.linalg.norm(pa, axis=1)
    rb = np.linalg.norm(pb, axis=1)
    el_a = np.arcsin(np.clip(np.einsum("ij,ij->i", u, pa) / ra, -1, 1))
    el_b = np.arcsin(np.clip(-np.einsum("ij,ij->i", u, pb) / rb, -1, 1))
    s = -np.einsum("ij,ij->i", pa, d) / rng**2
    closest = pa + s[:, None] * d
    blocked = (s > 0) & (s < 1) & (np.linalg.norm(closest, axis=1) < EARTH_RADIUS_M - 1e-6)
    visible = ~blocked & (el_a >= min_elevation_a) & (el_b >= min_elevation_b)
    return visible, el_a, el_b


@dataclass(frozen=True)
class Pass:
    aos_s: float
    los_s: float
    max_elevation_rad: float

    def __post_init__(self):
        if not self.los_s > self.aos_s:
            raise ValueError("pass must have los_s > aos_s")

    @property
    def duration_s(self) -> float:
        return self.los_s - self.aos_s


def _bisect_edge(vis: Callable[[float], bool], lo: float, hi: float, tol: float) -> tuple[float, float]:
    """Shrink [lo, hi] (vis(lo) != vis(hi)) to width <= tol."""
    v_lo = vis(lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if vis(mid) == v_lo:
            lo = mid
        else:
            hi = mid
    return lo, hi


def find_contacts(
    spec_a: PlatformSpec,
    spec_b: PlatformSpec,
    min_elevation_a: float,
    min_elevation_b: float,
    window: Sequence[float],
    step_s: float,
    tol_s: float = 0.1,
    elevation_of: str = "b",
) -> list[Pass]:
    """Visibility windows between two platforms.

    Edges are located on a ``step_s`` grid and refined by bisection to
    ``tol_s``; reported AOS/LOS lie on the visible side of each edge.
    Contacts shorter than one grid step can be missed. ``elevation_of``
    picks which endpoint's elevation is reported as the maximum.
    """
    t0, t1 = float(window[0]), float(window[1])
    if step_s <= 0:
        raise ValueError("step_s must be > 0")
    if not t1 > t0:
        return []
    n = int(math.floor((t1 - t0) / step_s))
    times = t0 + step_s * np.arange(n + 1)
    if times[-1] < t1:
        times = np.append(times, t1)
    vis, el_a, el_b = visibility_batch(spec_a, spec_b, times, min_elevation_a, min_elevation_b)
    el = el_b if elevation_of == "b" else el_a
    min_el = min_elevation_b if elevation_of == "b" else min_elevation_a

    def visible_at(t: float) -> bool:
        sa = propagate(spec_a, t)
        sb = propagate(spec_b, t)
        return line_of_sight(sa, sb, min_elevation_a, min_elevation_b).visible

    def elevation_at(t: float) -> float:
        los = line_of_sight(propagate(spec_a, t), propagate(spec_b, t))
        return los.elevation_b_rad if elevation_of == "b" else los.elevation_a_rad

    passes: list[Pass] = []
    idx = np.flatnonzero(vis)
    if idx.size == 0:
        return passes
    # split visible sample indices into contiguous runs
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate([[idx[0]], idx[breaks + 1]])
    ends = np.concatenate([idx[breaks], [idx[-1]]])
    for i0, i1 in zip(starts, ends):
        if i0 == 0:
            aos = t0
        else:
            _, aos = _bisect_edge(visible_at, float(times[i0 - 1]), float(times[i0]), tol_s)
        if i1 == len(times) - 1:
            los_t = t1
        else:
            los_t, _ = _bisect_edge(visible_at, float(times[i1]), float(times[i1 + 1]), tol_s)
        k = int(i0 + np.argmax(el[i0 : i1 + 1]))
        best = float(el[k])
        lo = max(aos, float(times[max(k - 1, 0)]))
        hi = min(los_t, float(times[min(k + 1, len(times) - 1)]))
        if hi > lo:
            res = minimize_scalar(
                lambda t: -elevation_at(t), bounds=(lo, hi), method="bounded", options={"xatol": 1e-3}
            )
            best = max(best, -float(res.fun))
        # grazing contact: discard
        if best <= min_el or los_t <= aos:
            continue
        passes.append(Pass(aos, los_t, best))
    return passes


def predict_passes(
    mobile: OrbitSpec,
    fixed: StaticPlatformSpec,
    min_elevation: float,
    window: Sequence[float],
    step_s: float = 10.0,
) -> list[Pass]:
    """Passes of an orbiting platform over a fixed site, sorted by AOS."""
    if step_s <= 0:
        raise ValueError("step_s must be > 0")
    return find_contacts(
        mobile, fixed, -math.pi / 2, min_elevation, window, step_s, tol_s=0.1, elevation_of="b"
    )
