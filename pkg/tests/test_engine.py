import copy
import csv
import io
import json
import math

import pytest

from lasercom.engine import CSV_COLUMNS, budget_at, direction_seed, run, sweep
from lasercom.geometry import predict_passes
from lasercom.scenario import BUILTIN_SCENARIOS, ScenarioError, load_scenario_dict, read_scenario
from lasercom.terminal import available_tx_power

_cache = {}


def report(name, seed=None):
    key = (name, seed)
    if key not in _cache:
        _cache[key] = run(read_scenario(f"builtin:{name}"), seed)
    return _cache[key]


def _csv_rows(rep):
    return list(csv.DictReader(io.StringIO(rep.csv_text())))


def test_drone_trial():
    rep = report("drone_trial")
    lk = rep.links["drone-gs"]
    assert lk["acquisition_time_s"] is not None
    assert lk["availability"] > 0.99
    assert set(lk["directions"]) == {"drone-gs", "gs-drone"}
    assert rep.steps == 24_000


def test_leo_pass_exact_delivery():
    sc = read_scenario("builtin:leo_ground_st")
    rep = report("leo_ground_st")
    d = rep.links["leo-ogs"]["directions"]["leo-ogs"]
    rate = sc.platform("leo").terminal.data_rate_bps
    dt = sc.time.dt_s
    comm_time = d["communicating_steps"] * dt
    assert d["delivered_bits"] == round(rate * dt) * d["communicating_steps"]
    assert d["availability"] == d["ok_steps"] / d["visible_steps"]
    lk = sc.link("leo-ogs")
    (p,) = predict_passes(
        sc.platform("leo").spec, sc.platform("ogs").spec, math.radians(lk.min_elevation_b_deg),
        (sc.time.t0_s, sc.time.t1_s),
    )
    t_comm = rep.links["leo-ogs"]["acquisition_time_s"] + sc.time.t0_s
    assert comm_time == pytest.approx(p.duration_s - (t_comm - p.aos_s), abs=2 * dt)


@pytest.mark.parametrize("name", BUILTIN_SCENARIOS)
def test_builtin_margin_signs_and_conservation(name):
    rep = report(name)
    for lid, lk in rep.links.items():
        assert lk["acquisition_time_s"] is not None
        assert lk["mean_margin_db"] > 0
        assert 0 <= lk["availability"] <= 1
        assert lk["delivered_bits"] > 0
    for pid, p in rep.platforms.items():
        assert p["ingested_bits"] == p["delivered_bits"] + p["overflow_dropped_bits"] + (
            p["buffer_end_bits"] - p["buffer_start_bits"]
        )


def test_causality_and_availability_from_csv():
    rep = report("geo_ground_hicali")
    rows = _csv_rows(rep)
    assert list(rows[0]) == CSV_COLUMNS
    for r in rows:
        if r["frame_ok"] == "1":
            assert r["phase"] == "Communicating"
    for did, stats in rep.links["geo-ogs"]["directions"].items():
        mine = [r for r in rows if r["link_id"] == did]
        ok = sum(1 for r in mine if r["frame_ok"] == "1" and r["phase"] == "Communicating")
        vis = sum(1 for r in mine if r["visible"] == "1")
        assert stats["availability"] == ok / vis
    assert rep.links["geo-ogs"]["availability"] < 1.0


def test_edfa_trace_follows_envelope():
    sc = read_scenario("builtin:leo_leo_edfa_endurance")
    rep = report("leo_leo_edfa_endurance")
    env = sc.platform("lead").terminal.edfa_envelope
    dt = sc.time.dt_s
    on = 0
    cutoff_seen = False
    rows = [r for r in rep.rows if r[1] == "lead-trail"]
    for r in rows:
        tx_w, phase = r[11], r[2]
        if phase != "Communicating":
            continue
        expected = min(2.0, available_tx_power(env, on * dt))
        assert tx_w == expected
        if tx_w > 0:
            on += 1
        else:
            cutoff_seen = True
            assert r[6] is None and r[8] is False
    assert cutoff_seen
    assert rep.platforms["lead"]["edfa_on_time_s"] == pytest.approx(on * dt)
    last_ok = max(r[0] for r in rows if r[8])
    first_zero = min(r[0] for r in rows if r[11] == 0.0)
    assert last_ok < first_zero


def test_field_of_regard_gate():
    base = {
        "name": "for-gate",
        "time": {"t1_s": 1600.0, "dt_s": 1.0},
        "platforms": [
            {"id": "leo", "kind": "satellite", "orbit": {"altitude_m": 600000.0}, "terminal": "FX"},
            {"id": "gs", "kind": "ground", "site": {"latitude_deg": 0.0, "longitude_deg": 70.0},
             "terminal": {"base": "HICALI", "wavelength_plan": "swapped"}},
        ],
        "links": [{"a": "leo", "b": "gs", "min_elevation_b_deg": 20.0}],
    }
    rep = run(load_scenario_dict(base))
    vis = [r for r in rep.rows if r[10]]
    assert vis
    assert {r[2] for r in vis} <= {"GpsExchange", "Discovery"}
    # the HICALI end never leaves Discovery; the FX end may advance on its own
    gs_events = [e for e in rep.events if e[1] == "leo-gs/gs"]
    assert {e[3] for e in gs_events} <= {"GpsExchange", "Discovery"}
    wide = copy.deepcopy(base)
    wide["platforms"][1]["terminal"]["base"] = "FX"
    assert run(load_scenario_dict(wide)).links["leo-gs"]["acquisition_time_s"] is not None


def test_determinism_and_seed_effects():
    sc = read_scenario("builtin:haps_ground_st")
    a, b = run(sc, 5), run(sc, 5)
    assert a.csv_text() == b.csv_text() and a.to_json() == b.to_json()
    assert a.events_csv_text() == b.events_csv_text()
    c = run(sc, 6)
    assert a.column("fade_db") != c.column("fade_db")
    for col in ("t_s", "link_id", "range_m", "elevation_deg", "visible"):
        assert a.column(col) == c.column(col)


def test_direction_streams_independent_of_other_links():
    s1 = direction_seed(3, "a-b").generate_state(4)
    assert (s1 == direction_seed(3, "a-b").generate_state(4)).all()
    assert not (s1 == direction_seed(3, "b-a").generate_state(4)).all()
    sc = read_scenario("builtin:drone_trial")
    d = sc.to_dict()
    d["platforms"].append({"id": "extra", "kind": "ground", "site": {"latitude_deg": 35.7, "longitude_deg": 139.6},
                           "terminal": "ST"})
    d["links"].append({"a": "drone", "b": "extra", "min_elevation_b_deg": 10.0})
    d["time"]["t1_s"] = 5.0
    sc2 = load_scenario_dict(d)
    base = copy.deepcopy(sc.to_dict())
    base["time"]["t1_s"] = 5.0
    r1 = run(load_scenario_dict(base))
    r2 = run(sc2)
    assert r1.column("fade_db", "gs-drone") == r2.column("fade_db", "gs-drone")


def test_sweep_altitude_far_field_law():
    sc = read_scenario("builtin:leo_ground_st")
    before = sc.to_dict()
    reps = sweep(sc, "platforms.leo.orbit.altitude_m", [400e3, 600e3, 800e3])
    assert sc.to_dict() == before
    assert [r.seed for r in reps] == [sc.seed, sc.seed + 1, sc.seed + 2]
    points = []
    for r in reps:
        rows = [x for x in r.rows if x[6] is not None]
        best = min(rows, key=lambda x: abs(x[4] - 45.0))
        assert abs(best[4] - 45.0) < 0.1
        points.append((best[3], best[6]))
    margins = [m for _, m in points]
    assert margins[0] > margins[1] > margins[2]
    for (r1, m1), (r2, m2) in zip(points, points[1:]):
        assert m1 - m2 == pytest.approx(20 * math.log10(r2 / r1), abs=0.05)


def test_sweep_power_three_db_and_workers():
    sc = read_scenario("builtin:leo_ground_st")
    path = "platforms.leo.terminal.tx_power_nominal_W"
    lo, hi = sweep(sc, path, [1.0, 2.0])
    m_lo = lo.column("margin_db")
    m_hi = hi.column("margin_db")
    common = [(a, b) for a, b in zip(m_lo, m_hi) if a is not None and b is not None]
    assert len(common) > 1000
    assert all(abs((b - a) - 10 * math.log10(2)) < 1e-9 for a, b in common)
    par = sweep(sc, path, [1.0, 2.0], workers=2)
    assert [p.to_json() for p in par] == [lo.to_json(), hi.to_json()]


def test_sweep_edge_cases():
    sc = read_scenario("builtin:drone_trial")
    assert sweep(sc, "time.t1_s", []) == []
    with pytest.raises(KeyError):
        sweep(sc, "platforms.nobody.buffer.capacity_bits", [1])
    with pytest.raises(KeyError):
        sweep(sc, "platforms.drone.kind", [1])
    with pytest.raises(ScenarioError):
        sweep(sc, "time.dt_s", [1.0])


def test_budget_at():
    sc = read_scenario("builtin:leo_ground_st")
    bud = budget_at(sc, "leo-ogs", 1200.0)
    assert bud.margin_dB > 0
    rep = report("leo_ground_st")
    row = next(r for r in rep.rows if r[0] == 1200.0)
    assert bud.rx_power_dBm == pytest.approx(row[5], abs=1e-9)
    with pytest.raises(ValueError):
        budget_at(sc, "leo-ogs", 10.0)
    with pytest.raises(KeyError):
        budget_at(sc, "leo-mars", 1200.0)


def test_report_json_mirrors_summary():
    rep = report("drone_trial")
    d = json.loads(rep.to_json())
    assert d["seed"] == rep.seed and d["steps"] == rep.steps
    assert d["links"]["drone-gs"]["delivered_bits"] == rep.links["drone-gs"]["delivered_bits"]
