"""Acceptance criteria 1-10. Each test prints one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` or ``python3 tests/test_acceptance.py``.
"""

from __future__ import annotations

import json
import math
import subprocess
import sys
import time

import numpy as np
import pytest

import oracles
from lasercom.channel import (
    AtmosphereSpec,
    ChannelSample,
    compute_link_budget,
    outage_probability,
    sample_fading,
)
from lasercom.engine import run
from lasercom.geometry import LineOfSight, OrbitSpec, StaticPlatformSpec, point_ahead, predict_passes
from lasercom.pat import (
    DisturbanceSpec,
    PatConfig,
    PatInputs,
    PatState,
    Phase,
    fine_loop_residual,
    first_order_sensitivity,
    step,
)
from lasercom.scenario import BUILTIN_SCENARIOS, read_scenario
from lasercom.terminal import available_tx_power, beam_divergence, builtin_profiles, strehl_penalty_db

DEG = math.pi / 180


def _verdict(n: int, title: str, ok: bool, detail: str) -> None:
    print(f"{'PASS' if ok else 'FAIL'} [{n:2d}] {title}: {detail}")
    assert ok, detail


def test_c01_profile_fidelity():
    t0 = time.perf_counter()
    res = subprocess.run(
        [sys.executable, "-m", "lasercom.cli", "profiles", "--json", "-"], capture_output=True, text=True, timeout=30
    )
    elapsed = time.perf_counter() - t0
    d = json.loads(res.stdout)
    want = {"HICALI": (0.15, -10.0, 10.0), "FX": (0.09, -90.0, 90.0), "ST": (0.03, -90.0, 90.0)}
    ok = res.returncode == 0 and set(d) == set(want)
    for name, (ap, lo, hi) in want.items():
        p = d[name]
        f = p["field_of_regard"]
        ok &= p["aperture_m"] == ap
        ok &= (f["azimuth_full_deg"], f["elevation_min_deg"], f["elevation_max_deg"]) == (360.0, lo, hi)
        ok &= all(1530.0 <= p[k] <= 1565.0 for k in ("wavelength_tx_nm", "wavelength_rx_nm"))
        ok &= p["modem"]["rate_bps"] * p["wdm_channels_per_direction"] == 10e9
    ok &= elapsed < 1.0
    _verdict(1, "profile fidelity", ok, f"3 profiles exact, `sim profiles` took {elapsed:.2f} s")


def test_c02_optics_numbers():
    fx, st = builtin_profiles()["FX"], builtin_profiles()["ST"]
    pen = strehl_penalty_db(fx.wavefront_error_rms_waves)
    div_fx, div_st = beam_divergence(fx), beam_divergence(st)
    ok = (
        fx.optics_transmission == 0.93
        and abs(pen - 0.475) <= 0.005
        and abs(pen - oracles.marechal_db(1 / 19)) <= 0.005
        and abs(div_fx * 1e6 - 21.9) <= 0.1
        and abs(div_fx - oracles.divergence(1550e-9, 0.09)) <= 1e-15
        and math.isclose(div_st, 3 * div_fx, rel_tol=1e-15)
    )
    _verdict(2, "optics numbers", ok,
             f"T=0.93, Strehl {pen:.4f} dB, FX {div_fx * 1e6:.3f} urad, ST/FX {div_st / div_fx:.15f}")


def test_c03_pass_realism():
    sat, gs = OrbitSpec(600e3), StaticPlatformSpec(0.0, 1.0)
    t0 = time.perf_counter()
    passes = predict_passes(sat, gs, 5 * DEG, (0.0, 86400.0), step_s=10.0)
    elapsed = time.perf_counter() - t0
    runs = oracles.brute_force_passes(600e3, 0.0, 0.0, 0.0, 0.0, 1.0, 5 * DEG, 0.0, 86400.0, step=1.0)
    durations = [p.duration_s for p in passes]
    err = max(max(abs(p.aos_s - a), abs(p.los_s - b)) for p, (a, b) in zip(passes, runs)) if runs else math.inf
    ok = (
        len(passes) == len(runs) > 0
        and all(300 <= d <= 780 for d in durations)
        and max(durations) >= 540
        and err <= 1.0
        and elapsed < 10.0
    )
    _verdict(3, "pass realism", ok,
             f"{len(passes)} passes, durations {min(durations):.1f}-{max(durations):.1f} s, "
             f"max AOS/LOS error vs 1 s sampler {err:.2f} s, {elapsed:.2f} s runtime")


def test_c04_point_ahead():
    got = point_ahead(7600.0)
    ref = 2 * 7600.0 / oracles.C * 1e6
    ok = abs(got - 50.7) <= 0.1 and abs(got - ref) <= 1e-12
    _verdict(4, "point-ahead", ok, f"{got:.4f} urad (2v/c oracle {ref:.4f})")


def test_c05_control_loop():
    s = first_order_sensitivity(500.0, 500.0)
    r = fine_loop_residual(DisturbanceSpec(((50.0, 10.0),)), 500.0)
    rng = np.random.default_rng(2024)
    cfg = PatConfig(gps_exchange_duration_s=0.2, scan_dwell_s=0.05, discovery_timeout_s=1.0)
    violations = 0
    reached = 0
    for _ in range(1000):
        state = PatState()
        for _ in range(int(rng.integers(20, 120))):
            inp = PatInputs(
                visible=bool(rng.random() < 0.9),
                beacon_detected=bool(rng.random() < 0.8),
                in_field_of_regard=bool(rng.random() < 0.9),
                residual_jitter_urad=float(rng.uniform(0.0, 2.0)),
            )
            state, events = step(state, cfg, inp, 0.05)
            for e in events:
                if e.to_phase == Phase.COMMUNICATING:
                    reached += 1
                    violations += inp.residual_jitter_urad > cfg.fine_accuracy_urad
            if state.phase == Phase.COMMUNICATING:
                violations += state.residual_jitter_rms_urad > cfg.fine_accuracy_urad
    ok = abs(s - 1 / math.sqrt(2)) <= 1e-9 and abs(r - 0.704) <= 0.01 and violations == 0 and reached > 0
    _verdict(5, "control loop", ok,
             f"|S(fc)|-1/sqrt2 = {s - 1 / math.sqrt(2):.1e}, residual {r:.4f} urad, "
             f"{reached} Communicating entries in 1000 traces, {violations} gate violations")


def test_c06_channel_statistics():
    t0 = time.perf_counter()
    tau, dt = 1e-3, 5e-4
    spec = AtmosphereSpec(1.0, 0.3, tau)
    fade = sample_fading(spec, 1e6 * dt, dt, seed=606)
    ln_i = -fade * math.log(10) / 10
    mean_i = float(np.mean(np.exp(ln_i)))
    var_ln = float(np.var(ln_i))
    x = ln_i - ln_i.mean()
    rho = float(np.dot(x[:-1], x[1:]) / np.dot(x, x))
    rho_ref = math.exp(-dt / tau)
    big = sample_fading(spec, 1e7 * dt, dt, seed=607)
    rel = {m: float(np.mean(big > m)) / outage_probability(m, 0.3) - 1 for m in (1.0, 3.0, 6.0)}
    elapsed = time.perf_counter() - t0
    ok = (
        len(fade) == 1_000_000
        and abs(mean_i - 1) <= 0.01
        and abs(var_ln / 0.3 - 1) <= 0.03
        and abs(rho / rho_ref - 1) <= 0.02
        and all(abs(v) <= 0.05 for v in rel.values())
        and elapsed < 60
    )
    _verdict(6, "channel statistics", ok,
             f"E[I]={mean_i:.4f}, var lnI={var_ln:.4f}, rho={rho:.4f} (ref {rho_ref:.4f}), "
             f"outage rel err {', '.join(f'{m:g}dB {v:+.3f}' for m, v in rel.items())}, {elapsed:.1f} s")


def _los(rng_m, el=math.pi / 2):
    return LineOfSight(rng_m, el, el, 0.0, 0.0, 0.0, 0.0, 0.0, True, False)


def test_c07_ledger_and_budget_oracle():
    profiles = builtin_profiles()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(2000):
        tx = profiles[str(rng.choice(list(profiles)))]
        bud = compute_link_budget(
            tx,
            profiles["FX"].swapped(),
            _los(float(rng.uniform(1.0, 4e7)), float(rng.uniform(0.09, math.pi / 2))),
            AtmosphereSpec(float(rng.uniform(0, 3)), 0.1),
            ChannelSample(fade_dB=float(rng.normal(0, 2))),
            float(rng.uniform(0.1, 5)),
            float(rng.uniform(0, 5)),
            float(rng.uniform(0, 5)),
        )
        worst = max(worst, abs(bud.tx_power_dBm + math.fsum(v for _, v in bud.terms) - bud.rx_power_dBm))
    fx = profiles["FX"]
    bud = compute_link_budget(fx, fx.swapped(), _los(1e6))
    t = dict(bud.terms)
    theta = oracles.divergence(1550e-9, 0.09)
    checks = {
        "tx_optics": (-t["tx_optics"], -10 * math.log10(0.93), 0.005),
        "tx_strehl": (-t["tx_strehl_marechal"], oracles.marechal_db(1 / 19), 0.005),
        "geometric": (-t["geometric_flat_top"], oracles.flat_top_db(theta, 1e6, 0.09), 0.1),
        "pointing": (-t["pointing_gaussian"], oracles.mc_pointing_loss_db(math.sqrt(2) * 1e-6, theta), 0.005),
        "rx_optics": (-t["rx_optics"], -10 * math.log10(0.93), 0.005),
        "rx_strehl": (-t["rx_strehl_marechal"], oracles.marechal_db(1 / 19), 0.005),
    }
    term_ok = all(abs(a - b) <= tol for a, b, tol in checks.values())
    ok = worst <= 1e-9 and term_ok and abs(bud.rx_power_dBm - (-16.4)) <= 0.3 and abs(-t["geometric_flat_top"] - 47.7) <= 0.1
    _verdict(7, "ledger closure and budget oracle", ok,
             f"max closure error {worst:.1e} dB over 2000 budgets; FX-FX 1000 km rx {bud.rx_power_dBm:.3f} dBm, "
             f"all {len(checks)} terms match their oracles")


def test_c08_edfa_envelope():
    sc = read_scenario("builtin:leo_leo_edfa_endurance")
    rep = run(sc)
    env = sc.platform("lead").terminal.edfa_envelope
    dt = sc.time.dt_s
    on = 0
    bad = 0
    levels = {"2W": 0, "1.6W": 0, "0W": 0}
    delivered_after_cutoff = False
    for r in rep.rows:
        if r[1] != "lead-trail" or r[2] != "Communicating":
            continue
        t_on = on * dt
        want = 2.0 if t_on <= 600 else 1.6 if t_on <= 3600 else 0.0
        bad += r[11] != want or r[11] != available_tx_power(env, t_on)
        levels["2W" if want == 2.0 else "1.6W" if want == 1.6 else "0W"] += 1
        if r[11] > 0:
            on += 1
        elif r[8]:
            delivered_after_cutoff = True
    ok = bad == 0 and all(levels.values()) and not delivered_after_cutoff and sc.time.t1_s - sc.time.t0_s == 4000
    _verdict(8, "EDFA envelope", ok,
             f"{bad} staircase mismatches; steps at 2 W / 1.6 W / 0 W = {levels['2W']}/{levels['1.6W']}/{levels['0W']}; "
             f"delivery after cutoff: {delivered_after_cutoff}")


def test_c09_conservation():
    lines = []
    ok = True
    for name in BUILTIN_SCENARIOS:
        rep = run(read_scenario(f"builtin:{name}"))
        for pid, p in rep.platforms.items():
            bal = p["ingested_bits"] - (p["delivered_bits"] + p["overflow_dropped_bits"]
                                        + p["buffer_end_bits"] - p["buffer_start_bits"])
            ok &= bal == 0
        if name == "leo_ground_st":
            sc = read_scenario(f"builtin:{name}")
            d = rep.links["leo-ogs"]["directions"]["leo-ogs"]
            rate = sc.platform("leo").terminal.data_rate_bps
            exact = round(rate * sc.time.dt_s) * d["communicating_steps"]
            ok &= d["delivered_bits"] == exact and d["availability"] == 1.0
            lines.append(f"LEO pass {d['delivered_bits']} bits = rate x {d['communicating_steps'] * sc.time.dt_s:.1f} s")
    _verdict(9, "conservation", ok, f"bit-exact balance on {len(BUILTIN_SCENARIOS)} scenarios; " + "; ".join(lines))


def test_c10_determinism():
    sc = read_scenario("builtin:drone_trial")
    a, b = run(sc), run(sc)
    same = a.csv_text() == b.csv_text() and a.to_json() == b.to_json()
    c = run(sc, sc.seed + 1)
    fades_differ = a.column("fade_db") != c.column("fade_db")
    geometry_same = all(a.column(k) == c.column(k) for k in ("t_s", "link_id", "range_m", "elevation_deg"))
    ok = same and fades_differ and geometry_same
    _verdict(10, "determinism", ok,
             f"byte-identical CSV/JSON: {same}; new seed changes fades: {fades_differ}, geometry unchanged: {geometry_same}")


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_c") and callable(fn):
            try:
                fn()
            except AssertionError:
                failed += 1
            except Exception as exc:  # report and keep going
                failed += 1
                print(f"FAIL {name}: {type(exc).__name__}: {exc}")
    sys.exit(1 if failed else 0)
