import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

import oracles
from lasercom.datalink import (
    MODEM_10G,
    BufferSpec,
    BufferState,
    ModemProfile,
    buffer_step,
    frame_margins,
    frame_success,
    ingest_for_step,
    simulate_delivery,
)


def test_frame_success_examples():
    assert frame_success([3.0] * 100)
    assert not frame_success([-1.0] * 100)
    assert frame_success([6.0, -3.0] * 50)
    assert frame_success([0.0])
    with pytest.raises(ValueError):
        frame_success([])


def test_delivery_examples():
    n = 60_000  # 600 s of 10 ms frames
    rec = simulate_delivery(np.full(n, 10.0), MODEM_10G, 1)
    assert rec.delivered_bits == 6_000_000_000_000
    assert rec.availability == 1.0
    assert simulate_delivery(np.full(n, 10.0), MODEM_10G, 4).delivered_bits == 24_000_000_000_000
    bad = simulate_delivery(np.full(n, -10.0), MODEM_10G, 1)
    assert bad.delivered_bits == 0 and bad.availability == 0.0
    assert bad.dropped_bits == 6_000_000_000_000
    with pytest.raises(ValueError):
        simulate_delivery([1.0], MODEM_10G, 5)


def test_delivery_record_series():
    m = np.r_[np.full(100, 5.0), np.full(100, -5.0)]
    rec = simulate_delivery(m, MODEM_10G)
    assert rec.delivered_bits == int(rec.bits_delivered.sum())
    assert rec.frame_ok[:100].all() and not rec.frame_ok[100:].any()
    assert rec.totals()["frames"] == 200


def test_frame_resampling():
    # samples coarser than frames repeat; finer samples average linearly
    assert np.array_equal(frame_margins([1.0, 2.0], 0.1, 0.01), np.repeat([1.0, 2.0], 10))
    fm = frame_margins([0.0, 10 * math.log10(3)], 0.005, 0.01)
    assert fm[0] == pytest.approx(10 * math.log10(2))
    with pytest.raises(ValueError):
        frame_margins([1.0], 0.003, 0.01)
    rec = simulate_delivery(np.full(600, 3.0), MODEM_10G, dt_s=0.1)
    assert rec.delivered_bits == 10_000_000_000 * 60


def test_modem_validation():
    with pytest.raises(ValueError):
        ModemProfile("x", 0.0)
    with pytest.raises(ValueError):
        ModemProfile("x", 1e9, interleaver_span_s=0.001, frame_duration_s=0.01)
    with pytest.raises(ValueError):
        ModemProfile("x", 1e9, duplex="half")
    assert ModemProfile.from_dict(MODEM_10G.to_dict()) == MODEM_10G
    assert MODEM_10G.frames_per_span == 100


def test_buffer_examples():
    spec = BufferSpec()
    assert spec.capacity_bits == 6_000_000_000_000
    empty = BufferState(spec.capacity_bits, 0)
    s, dropped, _ = buffer_step(empty, 10**9, 0)
    assert (s.occupancy_bits, dropped) == (10**9, 0)
    full = BufferState.from_spec(spec)
    s, dropped, _ = buffer_step(full, 10**9, 0)
    assert (s.occupancy_bits, dropped) == (spec.capacity_bits, 10**9)
    s, dropped, delivered = buffer_step(BufferState(spec.capacity_bits, 5 * 10**11), 0, 6 * 10**11)
    assert (s.occupancy_bits, delivered, dropped) == (0, 5 * 10**11, 0)
    with pytest.raises(ValueError):
        buffer_step(empty, -1, 0)
    with pytest.raises(ValueError):
        BufferSpec(capacity_bits=0)
    with pytest.raises(ValueError):
        BufferSpec(initial_bits=10**13)


def test_ingest_schedule_is_exact():
    rate, dt = 2e9 / 3, 0.1
    total = sum(ingest_for_step(rate, k, dt) for k in range(1000))
    assert total == math.floor(rate * 1000 * dt)


def test_delivery_matches_span_oracle():
    rng = np.random.default_rng(2)
    m = rng.normal(0.5, 4.0, 20_000)
    rec = simulate_delivery(m, MODEM_10G)
    ok = oracles.span_success(m, MODEM_10G.frames_per_span)
    assert np.array_equal(rec.frame_ok, np.repeat(ok, MODEM_10G.frames_per_span))


@pytest.mark.slow
def test_long_run_fraction_matches_resampling_oracle():
    # 1e7 frames: delivered fraction vs an independent resampled estimate of P(span mean >= 1)
    tau, frame = 0.02, 0.01
    margin = 1.0
    n = 10_000_000
    fades = -oracles.ar1_log_irradiance(0.3, frame / 2, tau, 2 * n, seed=21) * 10 / math.log(10)
    m = margin - fades
    # frame margins: linear mean over the two sub-samples of each frame
    lin = 10 ** (m / 10)
    fm = 10 * np.log10(lin.reshape(-1, 2).mean(axis=1))
    rec = simulate_delivery(fm, ModemProfile("t", 1e9, interleaver_span_s=0.2, frame_duration_s=frame))
    ref_m = margin + oracles.ar1_log_irradiance(0.3, frame / 2, tau, 2 * n, seed=99) * 10 / math.log(10)
    ref = oracles.span_success(10 * np.log10((10 ** (ref_m / 10)).reshape(-1, 2).mean(axis=1)), 20).mean()
    assert 0 < ref < 1
    assert rec.availability == pytest.approx(ref, rel=0.05)


# ---- properties


@given(st.lists(st.floats(-30, 30), min_size=1, max_size=200), st.floats(0, 10))
def test_frame_success_monotone(ms, bump):
    if frame_success(ms):
        assert frame_success([m + bump for m in ms])


ops = st.lists(st.tuples(st.integers(0, 10**12), st.integers(0, 10**12)), max_size=60)


@given(st.integers(1, 10**13), st.integers(0, 10**13), ops)
def test_buffer_conservation(cap, start, steps):
    start = min(start, cap)
    s = BufferState(cap, start)
    for ing, req in steps:
        before = s.occupancy_bits
        s, dropped, delivered = buffer_step(s, ing, req)
        assert delivered <= before + ing
        assert 0 <= s.occupancy_bits <= cap
        assert ing == delivered + dropped + (s.occupancy_bits - before)
    assert s.ingested_bits == s.delivered_bits + s.dropped_bits + (s.occupancy_bits - start)


@given(st.floats(0, 1e11), st.floats(1e-3, 1.0), st.integers(1, 2000))
def test_ingest_cumulative_never_drifts(rate, dt, n):
    total = sum(ingest_for_step(rate, k, dt) for k in range(n))
    assert total == math.floor(rate * n * dt)


@given(st.floats(-20, 20), st.integers(1, 4), st.integers(1, 30))
def test_no_fading_delivers_rate_times_duration(margin, ch, spans):
    n = spans * MODEM_10G.frames_per_span
    rec = simulate_delivery(np.full(n, margin), MODEM_10G, ch)
    expected = int(10e9 * ch * 0.01) * n if 10 ** (margin / 10) >= 1.0 else 0
    assert rec.delivered_bits == expected
    assert 0.0 <= rec.availability <= 1.0
