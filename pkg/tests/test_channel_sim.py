import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from polar_harq.channel_sim import (TRUNCATION_MARKER, DecoderConfig, HarqLink, LlrBuffer,
                                    SessionConfig, assemble_llr_buffer, awgn, fer_rows,
                                    frame_rng, noise_sigma2, qpsk_llr, qpsk_modulate,
                                    run_harq_session, uncoded_ber, wilson_interval, write_fer_csv)
from polar_harq.harq_scheduler import plan_schedule
from polar_harq.polar_core import CodeConfig
from polar_harq.scl_decoder import QuantSpec

SMALL = CodeConfig.for_length(64, 24, 8)
SCHED = (64, 96, 128)
FLOAT4 = DecoderConfig(list_size=4, quant=None)


def test_qpsk_mapping():
    s = qpsk_modulate([0, 0, 0, 1, 1, 0, 1, 1])
    r = 1 / math.sqrt(2)
    np.testing.assert_allclose(s, [r + 1j * r, r - 1j * r, -r + 1j * r, -r - 1j * r])
    np.testing.assert_allclose(np.abs(s), 1.0)
    with pytest.raises(ValueError):
        qpsk_modulate([0, 1, 1])


def test_llr_scale_and_sign():
    s = qpsk_modulate([0, 1])
    llr = qpsk_llr(s, 0.0)
    # sigma^2 = 1/2 per dimension at 0 dB, amplitude 1/sqrt(2)
    np.testing.assert_allclose(llr, [2.0, -2.0])
    assert noise_sigma2(10 * math.log10(2)) == pytest.approx(0.25)
    q = QuantSpec(5, 8, 11, 2.0)
    np.testing.assert_array_equal(qpsk_llr(s, 0.0, q), [4, -4])


def test_uncoded_ber_at_4db():
    rng = np.random.default_rng(5)
    bits = rng.integers(0, 2, 400_000, dtype=np.uint8)
    y = awgn(qpsk_modulate(bits), 4.0, rng)
    ber = np.mean((qpsk_llr(y, 4.0) < 0) != bits.astype(bool))
    p = uncoded_ber(4.0)
    sigma = math.sqrt(p * (1 - p) / bits.size)
    assert abs(ber - p) < 3 * sigma
    assert p == pytest.approx(0.5 * math.erfc(math.sqrt(10 ** 0.4) / math.sqrt(2)))


def test_assemble_buffer_layout():
    plans = plan_schedule(CodeConfig.for_length(6, 4), [6, 10, 16])
    p1, p2, p3 = plans
    b1 = assemble_llr_buffer(None, np.arange(1, 7.0), p1)
    assert b1.filled.sum() == 6 and not b1.filled[:2].any()
    b2 = assemble_llr_buffer(b1, [7.0, 8.0, 9.0, 10.0], p2, p1)
    assert b2.llr.size == 16 and b2.filled.sum() == 10
    np.testing.assert_array_equal(b2.llr[10:], b1.llr[2:])
    np.testing.assert_array_equal(b2.llr[6:10], [7, 8, 9, 10])
    b3 = assemble_llr_buffer(b2, np.ones(6), p3, p2)
    assert b3.filled.all()
    with pytest.raises(ValueError):
        assemble_llr_buffer(b1, [1.0], p2, p1)
    with pytest.raises(RuntimeError):
        bad = LlrBuffer(b1.llr, np.ones(8, bool))
        assemble_llr_buffer(bad, np.ones(4), p2, p1)


@given(st.integers(0, 2**32 - 1))
def test_noiseless_buffer_signs(seed):
    plans = plan_schedule(CodeConfig.for_length(12, 8), [12, 20, 32])
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, 32, dtype=np.uint8)
    buf, prev = None, None
    for p in plans:
        sl = p.transmitted_slice()
        xt = x[32 - p.n_t:][sl]
        buf = assemble_llr_buffer(buf, qpsk_llr(qpsk_modulate(xt), 10.0), p, prev)
        prev = p
    np.testing.assert_array_equal(buf.llr < 0, x.astype(bool))


def test_noiseless_loopback_every_transmission():
    link = HarqLink(SMALL, SCHED, FLOAT4)
    rng = frame_rng(1, 0, 0)
    for _ in range(5):
        msg = rng.integers(0, 2, SMALL.k, dtype=np.uint8)
        for t, plan in enumerate(link.plans, start=1):
            t_ack, decoded = link.run_frame(msg, 60.0, rng, t, check_consistency=True)
            assert t_ack == 1
            np.testing.assert_array_equal(decoded, msg)


def test_forced_retransmissions_keep_old_bits():
    link = HarqLink(SMALL, SCHED, FLOAT4)
    rng = frame_rng(2, 0, 0)
    msg = rng.integers(0, 2, SMALL.k, dtype=np.uint8)
    # very low SNR forces every transmission; consistency is checked at each step
    link.run_frame(msg, -15.0, rng, 3, check_consistency=True)


def test_session_high_and_low_snr():
    hi = run_harq_session(SessionConfig(20.0, SCHED, seed=3, frames=40), SMALL, FLOAT4)
    assert hi.errors.tolist() == [0, 0, 0] and hi.avg_transmissions == 1.0
    lo = run_harq_session(SessionConfig(-12.0, SCHED, seed=3, frames=40), SMALL, FLOAT4)
    assert lo.errors[-1] >= 38
    assert lo.avg_transmissions > 2.5
    assert np.all(np.diff(lo.errors) <= 0)


def test_session_is_deterministic_and_worker_independent():
    cfg = SessionConfig(0.0, SCHED, seed=9, frames=60, batch_size=10)
    a = run_harq_session(cfg, SMALL, FLOAT4)
    b = run_harq_session(cfg, SMALL, FLOAT4)
    c = run_harq_session(cfg, SMALL, FLOAT4, workers=2)
    for r in (b, c):
        np.testing.assert_array_equal(r.errors, a.errors)
        np.testing.assert_array_equal(r.delivered_at, a.delivered_at)
        np.testing.assert_array_equal(r.match, a.match)


def test_early_stop_is_batch_aligned():
    cfg = SessionConfig(-10.0, SCHED, seed=1, frames=500, stop_errors=15, stop_tx=1, batch_size=10)
    res = run_harq_session(cfg, SMALL, FLOAT4)
    assert res.frames == 20 and res.errors[0] >= 15


def test_session_config_validation():
    with pytest.raises(ValueError):
        SessionConfig(0.0, (64, 63))
    with pytest.raises(ValueError):
        SessionConfig(0.0, (64, 97))
    with pytest.raises(ValueError):
        SessionConfig(0.0, (64, 96), max_tx=3)
    assert SessionConfig(0.0, (64, 96)).stop_tx == 2


def test_wilson_examples():
    est = wilson_interval(0, 100)
    assert est.fer == 0 and est.low == 0 and est.high == pytest.approx(0.036995, abs=1e-5)
    est = wilson_interval(50, 100)
    assert est.low == pytest.approx(0.40383, abs=1e-4) and est.high == pytest.approx(0.59617, abs=1e-4)
    with pytest.raises(ValueError):
        wilson_interval(0, 0)


@settings(max_examples=10)
@given(st.floats(0.02, 0.5), st.integers(0, 2**32 - 1))
def test_wilson_coverage(p, seed):
    rng = np.random.default_rng(seed)
    hits = 0
    for e in rng.binomial(200, p, 2000):
        est = wilson_interval(int(e), 200)
        hits += est.low <= p <= est.high
    assert hits / 2000 > 0.92


def test_fer_csv_roundtrip(tmp_path):
    cfg = SessionConfig(20.0, SCHED, frames=10)
    res = run_harq_session(cfg, SMALL, FLOAT4)
    rows = fer_rows(20.0, SMALL, cfg, res)
    path = tmp_path / "fer.csv"
    write_fer_csv(rows, path)
    got = list(csv.DictReader(path.open()))
    assert [int(r["tx_index"]) for r in got] == [1, 2, 3]
    assert got[0]["rate"] == f"{24 / 64:.6f}"
    write_fer_csv(rows[:1], path, truncated=True)
    assert path.read_text().rstrip().splitlines()[-1] == TRUNCATION_MARKER
