"""Scenario orchestration: fixed-step geometry -> PAT -> budget -> delivery pipeline.

Per step and link, both endpoints are propagated, the line of sight is
evaluated, each end's PAT machine is advanced, and while the link is
Communicating a budget is computed per direction with a fresh fade sample.
Margins are grouped into interleaver spans; a decoded span delivers the bits
it reserved from the transmitter's buffer, a failed one releases them.

Seeds: each link direction owns a fading stream seeded from
``SeedSequence(master_seed, spawn_key=(crc32(direction_id),))`` so adding or
removing links never perturbs the other streams.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .channel import (
    VACUUM,
    ChannelSample,
    FadingProcess,
    atmospheric_attenuation_db,
    compute_link_budget,
    geometric_coupling_db,
    watts_to_dbm,
)
from .datalink import BufferState, buffer_step, frame_success, ingest_for_step
from .geometry import line_of_sight, mount_angles, point_ahead, propagate
from .pat import PatInputs, PatMachine, Phase, acquisition_time, fine_loop_residual, summarise_phases
from .scenario import LinkConfig, PlatformConfig, Scenario, ScenarioError, load_scenario_dict
from .terminal import available_tx_power, beam_divergence, in_field_of_regard, strehl_penalty_db

CSV_COLUMNS = [
    "t_s",
    "link_id",
    "phase",
    "range_m",
    "elevation_deg",
    "rx_power_dbm",
    "margin_db",
    "fade_db",
    "frame_ok",
    "buffer_bits",
    "visible",
    "tx_power_w",
]
EVENT_COLUMNS = ["time_s", "link_id", "from_phase", "to_phase", "reason"]


class InvariantViolation(RuntimeError):
    """An internal bookkeeping invariant failed during a run."""


def direction_seed(master_seed: int, direction_id: str) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(zlib.crc32(direction_id.encode()),))


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class DirectionStats:
    direction_id: str
    tx: str
    rx: str
    visible_steps: int = 0
    communicating_steps: int = 0
    ok_steps: int = 0
    delivered_bits: int = 0
    undelivered_bits: int = 0
    margins: list = field(default_factory=list)

    def summary(self) -> dict:
        finite = [m for m in self.margins if math.isfinite(m)]
        return {
            "availability": self.ok_steps / self.visible_steps if self.visible_steps else 0.0,
            "visible_steps": self.visible_steps,
            "communicating_steps": self.communicating_steps,
            "ok_steps": self.ok_steps,
            "delivered_bits": self.delivered_bits,
            "undelivered_bits": self.undelivered_bits,
            "min_margin_db": min(finite) if finite else None,
            "mean_margin_db": math.fsum(finite) / len(finite) if finite else None,
            "max_margin_db": max(finite) if finite else None,
        }


@dataclass
class SimReport:
    scenario: str
    seed: int
    steps: int
    dt_s: float
    links: dict[str, dict]
    platforms: dict[str, dict]
    rows: list[list] = field(default_factory=list, repr=False)
    events: list[tuple] = field(default_factory=list, repr=False)

    def summary(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "steps": self.steps,
            "dt_s": self.dt_s,
            "links": self.links,
            "platforms": self.platforms,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    def events_csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(EVENT_COLUMNS)
        for r in self.events:
            w.writerow([_fmt(v) for v in r])
        return buf.getvalue()

    def column(self, name: str, direction_id: str | None = None) -> list:
        i = CSV_COLUMNS.index(name)
        return [r[i] for r in self.rows if direction_id is None or r[1] == direction_id]


@dataclass
class _Direction:
    stats: DirectionStats
    tx: PlatformConfig
    rx: PlatformConfig
    fading: FadingProcess
    bits_per_step: int
    span_steps: int
    pending: list = field(default_factory=list)  # (row, reserved_bits, margin_db)
    atm_end: str | None = None


@dataclass
class _LinkRuntime:
    cfg: LinkConfig
    pa: PlatformConfig
    pb: PlatformConfig
    pat_a: PatMachine
    pat_b: PatMachine
    directions: list[_Direction]
    visible_run_start: float | None = None
    contacts: list = field(default_factory=list)
    max_point_ahead_urad: float = 0.0


def _beacon_rx_dbm(tx: PlatformConfig, rx: PlatformConfig, range_m: float, atm_db: float) -> float:
    t = tx.terminal
    theta = beam_divergence(t) * tx.pat.beacon_divergence_factor
    return (
        watts_to_dbm(t.tx_power_nominal_W)
        + 10 * math.log10(t.optics_transmission)
        - strehl_penalty_db(t.wavefront_error_rms_waves)
        - geometric_coupling_db(theta, range_m, rx.terminal.aperture_m)
        - atm_db
        + 10 * math.log10(rx.terminal.optics_transmission)
    )


def _atmosphere_for(link: LinkConfig, pa: PlatformConfig, pb: PlatformConfig):
    if pa.has_atmosphere:
        return pa.atmosphere, "a"
    if pb.has_atmosphere:
        return pb.atmosphere, "b"
    return VACUUM, None


def run(scenario: Scenario, seed: int | None = None) -> SimReport:
    """Simulate ``scenario``; the report is a pure function of (scenario, seed)."""
    seed = scenario.seed if seed is None else int(seed)
    tc = scenario.time
    dt = tc.dt_s
    n_steps = tc.n_steps
    platforms = {p.id: p for p in scenario.platforms}
    specs = {p.id: p.spec for p in scenario.platforms}
    residual = {
        p.id: fine_loop_residual(p.disturbance, p.terminal.fine_loop_bandwidth_hz) for p in scenario.platforms
    }
    jitter = {pid: max(residual[pid], platforms[pid].terminal.fine_pointing_accuracy_urad) for pid in platforms}
    buffers = {pid: BufferState.from_spec(p.buffer) for pid, p in platforms.items()}
    buffer_start = {pid: b.occupancy_bits for pid, b in buffers.items()}
    reserved = {pid: 0 for pid in platforms}
    on_steps = {pid: 0 for pid in platforms}
    overflow = {pid: 0 for pid in platforms}

    links: list[_LinkRuntime] = []
    for lk in scenario.links:
        pa, pb = platforms[lk.a], platforms[lk.b]
        atm, atm_end = _atmosphere_for(lk, pa, pb)
        dirs = []
        for did, tx_id, rx_id in lk.direction_ids():
            tx, rx = platforms[tx_id], platforms[rx_id]
            end = None
            if atm_end is not None:
                end = "tx" if (tx_id == lk.a) == (atm_end == "a") else "rx"
            dirs.append(
                _Direction(
                    stats=DirectionStats(did, tx_id, rx_id),
                    tx=tx,
                    rx=rx,
                    fading=FadingProcess(atm, dt, direction_seed(seed, did)),
                    bits_per_step=int(round(tx.terminal.data_rate_bps * dt)),
                    span_steps=max(1, int(round(tx.terminal.modem.interleaver_span_s / dt))),
                    atm_end=end,
                )
            )
        rt = _LinkRuntime(
            cfg=lk,
            pa=pa,
            pb=pb,
            pat_a=PatMachine(pa.pat.pat_config(pa.terminal)),
            pat_b=PatMachine(pb.pat.pat_config(pb.terminal)),
            directions=dirs,
        )
        rt.pat_a.command(tc.t0_s)
        rt.pat_b.command(tc.t0_s)
        links.append(rt)

    rows: list[list] = []
    events: list[tuple] = []
    for rt in links:
        for end, m in (("a", rt.pat_a), ("b", rt.pat_b)):
            pid = rt.cfg.a if end == "a" else rt.cfg.b
            events.extend((e.time_s, f"{rt.cfg.link_id}/{pid}", str(e.from_phase), str(e.to_phase), e.reason) for e in m.events)

    def resolve(d: _Direction) -> None:
        if not d.pending:
            return
        ok = frame_success([m for _, _, m in d.pending])
        total = sum(bits for _, bits, _ in d.pending)
        tx_id = d.tx.id
        reserved[tx_id] -= total
        if ok:
            buffers[tx_id], _, delivered = buffer_step(buffers[tx_id], 0, total)
            if delivered != total:
                raise InvariantViolation("reserved bits were not available for delivery")
            d.stats.delivered_bits += total
            d.stats.ok_steps += len(d.pending)
        else:
            d.stats.undelivered_bits += total
        for row, _, _ in d.pending:
            row[8] = ok
        d.pending.clear()

    for k in range(n_steps):
        t = tc.t0_s + (k + 1) * dt
        states = {pid: propagate(spec, t) for pid, spec in specs.items()}
        for pid, p in platforms.items():
            ing = ingest_for_step(p.buffer.ingest_rate_bps, k, dt)
            buffers[pid], dropped, _ = buffer_step(buffers[pid], ing, 0)
            overflow[pid] += dropped
        transmitting: set[str] = set()

        for rt in links:
            lk = rt.cfg
            sa, sb = states[lk.a], states[lk.b]
            los = line_of_sight(
                sa, sb, math.radians(lk.min_elevation_a_deg), math.radians(lk.min_elevation_b_deg)
            )
            u = los.direction
            az_a, el_a = mount_angles(sa, u, rt.pa.mount)
            az_b, el_b = mount_angles(sb, (-u[0], -u[1], -u[2]), rt.pb.mount)
            for_a = in_field_of_regard(rt.pa.terminal.field_of_regard, math.degrees(az_a), math.degrees(el_a))
            for_b = in_field_of_regard(rt.pb.terminal.field_of_regard, math.degrees(az_b), math.degrees(el_b))

            atm0 = rt.directions[0]
            atm_db = 0.0
            atm_el = None
            if atm0.atm_end is not None and los.visible:
                atm_el = los.elevation_a_rad if rt.pa.has_atmosphere else los.elevation_b_rad
                atm_db = atmospheric_attenuation_db(rt.pa.atmosphere if rt.pa.has_atmosphere else rt.pb.atmosphere, atm_el)

            def beacon(rx: PlatformConfig, tx: PlatformConfig, tx_for: bool, machine: PatMachine) -> bool:
                if not (los.visible and tx_for):
                    return False
                if machine.state.phase not in (
                    Phase.DISCOVERY,
                    Phase.COARSE_ACQUISITION,
                    Phase.FINE_TRACKING,
                    Phase.COMMUNICATING,
                    Phase.LOST_TRACK,
                ):
                    return False
                return _beacon_rx_dbm(tx, rx, los.range_m, atm_db) >= rx.pat.beacon_sensitivity_dbm

            in_a = PatInputs(
                visible=los.visible,
                beacon_detected=beacon(rt.pa, rt.pb, for_b, rt.pat_a),
                in_field_of_regard=for_a,
                residual_jitter_urad=residual[lk.a],
            )
            in_b = PatInputs(
                visible=los.visible,
                beacon_detected=beacon(rt.pb, rt.pa, for_a, rt.pat_b),
                in_field_of_regard=for_b,
                residual_jitter_urad=residual[lk.b],
            )
            for end_id, machine, inp in ((lk.a, rt.pat_a, in_a), (lk.b, rt.pat_b, in_b)):
                for e in machine.step(inp, dt, t):
                    events.append((e.time_s, f"{lk.link_id}/{end_id}", str(e.from_phase), str(e.to_phase), e.reason))

            phase = summarise_phases([rt.pat_a.state.phase, rt.pat_b.state.phase])
            communicating = phase == Phase.COMMUNICATING

            if los.visible and rt.visible_run_start is None:
                rt.visible_run_start = t
            elif not los.visible and rt.visible_run_start is not None:
                rt.contacts.append((rt.visible_run_start, t - dt))
                rt.visible_run_start = None
            if communicating:
                rt.max_point_ahead_urad = max(rt.max_point_ahead_urad, point_ahead(los.transverse_velocity_mps))

            for d in rt.directions:
                fade = d.fading.next_fade_db()
                st = d.stats
                if los.visible:
                    st.visible_steps += 1
                rx_dbm = margin = tx_w = None
                if communicating:
                    st.communicating_steps += 1
                    tx_w = min(
                        d.tx.terminal.tx_power_nominal_W,
                        available_tx_power(d.tx.terminal.edfa_envelope, on_steps[d.tx.id] * dt),
                    )
                    if tx_w > 0:
                        atm = rt.pa.atmosphere if rt.pa.has_atmosphere else (rt.pb.atmosphere if rt.pb.has_atmosphere else VACUUM)
                        bud = compute_link_budget(
                            d.tx.terminal,
                            d.rx.terminal,
                            los,
                            atmosphere=atm,
                            channel=ChannelSample(t, fade, atm_db),
                            tx_power_W=tx_w,
                            tx_jitter_urad=jitter[d.tx.id],
                            rx_jitter_urad=jitter[d.rx.id],
                            atmosphere_elevation_rad=atm_el,
                        )
                        rx_dbm, margin = bud.rx_power_dBm, bud.margin_dB
                        transmitting.add(d.tx.id)
                    else:
                        # amplifier off: nothing is sent, the open span closes
                        margin = -math.inf
                        resolve(d)
                    st.margins.append(margin)
                    if tx_w > 0:
                        avail = buffers[d.tx.id].occupancy_bits - reserved[d.tx.id]
                        bits = min(d.bits_per_step, max(0, avail))
                        reserved[d.tx.id] += bits
                else:
                    resolve(d)
                row = [
                    t,
                    d.stats.direction_id,
                    str(phase),
                    los.range_m,
                    math.degrees(los.elevation_rad),
                    rx_dbm,
                    margin if margin is None or math.isfinite(margin) else None,
                    fade if d.atm_end is not None else None,
                    False,
                    None,
                    los.visible,
                    tx_w,
                ]
                rows.append(row)
                if communicating and tx_w > 0:
                    d.pending.append((row, bits, margin))
                    if len(d.pending) >= d.span_steps:
                        resolve(d)
                row[9] = buffers[d.tx.id].occupancy_bits
        for pid in transmitting:
            on_steps[pid] += 1

    # close any open spans and contacts at the end of the window
    for rt in links:
        for d in rt.directions:
            resolve(d)
        if rt.visible_run_start is not None:
            rt.contacts.append((rt.visible_run_start, tc.t0_s + n_steps * dt))

    for pid, b in buffers.items():
        if reserved[pid] != 0:
            raise InvariantViolation(f"{pid}: {reserved[pid]} bits still reserved after the run")
        if b.ingested_bits != b.delivered_bits + b.dropped_bits + (b.occupancy_bits - buffer_start[pid]):
            raise InvariantViolation(f"{pid}: buffer conservation violated")

    link_reports: dict[str, dict] = {}
    for rt in links:
        trace_a = rt.pat_a.events
        trace_b = rt.pat_b.events
        acq = _link_acquisition_time(rows, rt, tc.t0_s)
        dir_summaries = {d.stats.direction_id: d.stats.summary() for d in rt.directions}
        link_reports[rt.cfg.link_id] = {
            "direction": rt.cfg.direction,
            "acquisition_time_s": acq,
            "acquisition_time_a_s": acquisition_time(trace_a),
            "acquisition_time_b_s": acquisition_time(trace_b),
            "availability": min(s["availability"] for s in dir_summaries.values()),
            "delivered_bits": sum(s["delivered_bits"] for s in dir_summaries.values()),
            "dropped_bits": sum(s["undelivered_bits"] for s in dir_summaries.values()),
            "min_margin_db": _min_opt(s["min_margin_db"] for s in dir_summaries.values()),
            "mean_margin_db": _mean_opt([s["mean_margin_db"] for s in dir_summaries.values()]),
            "max_point_ahead_urad": rt.max_point_ahead_urad,
            "contacts": [{"aos_s": a, "los_s": b, "duration_s": b - a} for a, b in rt.contacts],
            "directions": dir_summaries,
        }
    platform_reports = {
        pid: {
            "buffer_start_bits": buffer_start[pid],
            "buffer_end_bits": b.occupancy_bits,
            "ingested_bits": b.ingested_bits,
            "delivered_bits": b.delivered_bits,
            "overflow_dropped_bits": b.dropped_bits,
            "edfa_on_time_s": on_steps[pid] * dt,
            "fine_loop_residual_urad": residual[pid],
        }
        for pid, b in buffers.items()
    }
    events.sort(key=lambda e: e[0])
    return SimReport(
        scenario=scenario.name,
        seed=seed,
        steps=n_steps,
        dt_s=dt,
        links=link_reports,
        platforms=platform_reports,
        rows=rows,
        events=events,
    )


def _min_opt(values):
    vals = [v for v in values if v is not None]
    return min(vals) if vals else None


def _mean_opt(values):
    vals = [v for v in values if v is not None]
    return math.fsum(vals) / len(vals) if vals else None


def _link_acquisition_time(rows: list[list], rt: _LinkRuntime, t0: float) -> float | None:
    first = rt.directions[0].stats.direction_id
    for r in rows:
        if r[1] == first and r[2] == Phase.COMMUNICATING.value:
            return r[0] - t0
    return None


def budget_at(scenario: Scenario, direction_id: str, t_s: float, tx_power_W: float | None = None):
    """Mean-channel budget for one direction ``"tx-rx"`` at time ``t_s`` (no fade draw)."""
    tx_id, _, rx_id = direction_id.partition("-")
    lk = scenario.link(direction_id)
    if {tx_id, rx_id} != {lk.a, lk.b}:
        raise KeyError(direction_id)
    tx, rx = scenario.platform(tx_id), scenario.platform(rx_id)
    sa, sb = propagate(tx.spec, t_s), propagate(rx.spec, t_s)
    min_tx = lk.min_elevation_a_deg if tx_id == lk.a else lk.min_elevation_b_deg
    min_rx = lk.min_elevation_b_deg if tx_id == lk.a else lk.min_elevation_a_deg
    los = line_of_sight(sa, sb, math.radians(min_tx), math.radians(min_rx))
    if not los.visible:
        raise ValueError(f"{direction_id} has no line of sight at t = {t_s} s")
    atm, atm_el = VACUUM, None
    if tx.has_atmosphere:
        atm, atm_el = tx.atmosphere, los.elevation_a_rad
    elif rx.has_atmosphere:
        atm, atm_el = rx.atmosphere, los.elevation_b_rad
    jt = max(fine_loop_residual(tx.disturbance, tx.terminal.fine_loop_bandwidth_hz), tx.terminal.fine_pointing_accuracy_urad)
    jr = max(fine_loop_residual(rx.disturbance, rx.terminal.fine_loop_bandwidth_hz), rx.terminal.fine_pointing_accuracy_urad)
    return compute_link_budget(
        tx.terminal,
        rx.terminal,
        los,
        atmosphere=atm,
        tx_power_W=tx_power_W,
        tx_jitter_urad=jt,
        rx_jitter_urad=jr,
        atmosphere_elevation_rad=atm_el,
    )


# ---------------------------------------------------------------------------
# sweeps


def _resolve_path(tree: Any, path: str) -> tuple[Any, Any]:
    """Return (container, key) addressed by a dotted path.

    List elements may be addressed by index, by ``id`` (platforms) or by
    ``a-b`` (links).
    """
    tokens = path.split(".")
    node = tree
    for i, tok in enumerate(tokens):
        last = i == len(tokens) - 1
        if isinstance(node, list):
            key = None
            if tok.isdigit() and int(tok) < len(node):
                key = int(tok)
            else:
                for j, el in enumerate(node):
                    if isinstance(el, dict) and (el.get("id") == tok or f"{el.get('a')}-{el.get('b')}" == tok):
                        key = j
                        break
            if key is None:
                raise KeyError(f"path {path!r}: no element {tok!r}")
        elif isinstance(node, dict):
            if tok not in node:
                raise KeyError(f"path {path!r}: no key {tok!r}")
            key = tok
        else:
            raise KeyError(f"path {path!r}: {tok!r} is below a scalar")
        if last:
            return node, key
        node = node[key]
    raise KeyError(path)


def _run_one(args) -> SimReport:
    data, seed = args
    return run(load_scenario_dict(data), seed)


def sweep(
    scenario: Scenario, parameter_path: str, values: Sequence[float], workers: int = 1
) -> list[SimReport]:
    """One independent run per value with seed ``scenario.seed + index``."""
    base = scenario.to_dict()
    container, key = _resolve_path(base, parameter_path)
    current = container[key]
    if isinstance(current, bool) or not isinstance(current, (int, float)):
        raise KeyError(f"path {parameter_path!r} does not address a numeric scalar (found {current!r})")
    jobs = []
    for i, v in enumerate(values):
        data = copy.deepcopy(base)
        c, k = _resolve_path(data, parameter_path)
        c[k] = v
        jobs.append((data, scenario.seed + i))
    if not jobs:
        return []
    # validate everything before spending time on runs
    for data, _ in jobs:
        load_scenario_dict(data)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]


__all__ = [
    "CSV_COLUMNS",
    "EVENT_COLUMNS",
    "InvariantViolation",
    "ScenarioError",
    "SimReport",
    "budget_at",
    "direction_seed",
    "run",
    "sweep",
]
