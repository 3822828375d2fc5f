import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from apnc import harness
from apnc.harness import (
    BerRecord,
    OutOfRange,
    Point,
    SweepConfig,
    crossing,
    draw_packet,
    group_curves,
    packet_rng,
    penalty_db,
    penalty_with_error,
    run_point,
    sweep,
    sync_baseline,
)


def test_record_statistics():
    r = BerRecord("bpsk", 0.0, 0.0, 4.0, bits=1000, errors=10)
    assert r.ber == 0.01
    assert r.stderr == pytest.approx(math.sqrt(0.01 * 0.99 / 1000))
    assert r.curve_key == ("bpsk", 0.0, 0.0)


@pytest.mark.parametrize(
    "kw, field",
    [
        (dict(packets=0), "packets"),
        (dict(bits_per_packet=7, scheme="qpsk"), "bits_per_packet"),
        (dict(deltas=(1.0,)), "deltas"),
        (dict(phis=(7.0,)), "phis"),
        (dict(ebn0s=()), "ebn0s"),
        (dict(decoder="viterbi"), "decoder"),
        (dict(base_seed=-1), "base_seed"),
    ],
)
def test_config_validation_names_field(kw, field):
    with pytest.raises(ValueError, match=field):
        SweepConfig(**kw)


def test_grid_order():
    cfg = SweepConfig("qpsk", deltas=(0.0, 0.5), phis=(0.0, 1.0), ebn0s=(2.0, 4.0, 6.0))
    pts = cfg.points()
    assert len(pts) == 12
    assert pts[0] == Point("qpsk", 0.0, 0.0, 2.0)
    assert pts[1] == Point("qpsk", 0.0, 0.0, 4.0)
    assert pts[3] == Point("qpsk", 0.0, 1.0, 2.0)
    assert pts[6] == Point("qpsk", 0.5, 0.0, 2.0)
    assert cfg.n_symbols == 1024


def test_packet_rng_streams():
    a = packet_rng((3, 1), 5).integers(0, 2**32, 4)
    b = packet_rng((3, 1), 5).integers(0, 2**32, 4)
    c = packet_rng((3, 1), 6).integers(0, 2**32, 4)
    d = packet_rng((3, 2), 5).integers(0, 2**32, 4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c) and not np.array_equal(a, d)


def test_draw_packet_truth():
    p = Point("qpsk", 0.3, 0.2, math.inf).params(8)
    truth, y = draw_packet(packet_rng(0, 0), p, 16)
    assert truth.shape == (8,) and y.shape == (17,)
    from apnc.bp_decoder import decode_batch
    assert np.array_equal(decode_batch(y[None], p)[0], truth)


@pytest.mark.parametrize("scheme", ["bpsk", "qpsk"])
@pytest.mark.parametrize("delta, phi", [(0.0, 0.0), (0.5, math.pi / 2), (0.0, math.pi / 4), (0.73, 5.0)])
def test_noise_free_point_has_no_errors(scheme, delta, phi):
    rec = run_point(Point(scheme, delta, phi, math.inf), packets=3, seed=1, bits_per_packet=256)
    assert rec.errors == 0 and rec.bits == 768


def test_run_point_deterministic_and_thread_invariant():
    pt = Point("qpsk", 0.5, math.pi / 8, 4.0)
    one = run_point(pt, packets=150, seed=(9, 2), bits_per_packet=512, threads=1)
    again = run_point(pt, packets=150, seed=(9, 2), bits_per_packet=512, threads=1)
    many = run_point(pt, packets=150, seed=(9, 2), bits_per_packet=512, threads=4)
    assert one == again == many
    assert one.errors > 0


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv("APNC_THREADS", "3")
    assert harness.resolve_threads(None) == 3
    assert harness.resolve_threads(2) == 2
    with pytest.raises(ValueError):
        harness.resolve_threads(0)


def test_sweep_shapes_and_order():
    one = sweep(SweepConfig("bpsk", (0.0,), (0.0,), (6.0,), packets=2, bits_per_packet=64))
    assert len(one) == 1
    cfg = SweepConfig("bpsk", (0.0, 0.5), (0.0, 1.0), (2.0, 4.0, 6.0), packets=2, bits_per_packet=64)
    recs = sweep(cfg)
    assert [(r.delta, r.phi, r.ebn0_db) for r in recs] == [
        (p.delta, p.phi, p.ebn0_db) for p in cfg.points()
    ]
    curves = group_curves(recs)
    assert len(curves) == 4 and all(len(c) == 3 for c in curves.values())


def test_sync_baseline_matches_bp_when_aligned():
    for scheme in ("bpsk", "qpsk"):
        p = Point(scheme, 0.0, 0.0, 3.0).params(256)
        bits = 256 * p.scheme.bits_per_symbol
        ys = np.stack([draw_packet(packet_rng(4, k), p, bits)[1] for k in range(4)])
        from apnc.bp_decoder import decode_batch
        assert np.array_equal(sync_baseline(ys, p), decode_batch(ys, p))


def test_sync_baseline_ignores_offsets():
    p = Point("qpsk", 0.0, math.pi / 4, 10.0).params(512)
    ys = np.stack([draw_packet(packet_rng(5, k), p, 1024)[1] for k in range(2)])
    p0 = Point("qpsk", 0.0, 0.0, 10.0).params(512)
    assert np.array_equal(sync_baseline(ys, p), sync_baseline(ys, p0))


def test_ber_monotone_in_ebn0():
    recs = [run_point(Point("bpsk", 0.5, math.pi / 2, e), 40, seed=(1, i)) for i, e in enumerate((0, 3, 6, 9))]
    for a, b in zip(recs, recs[1:]):
        assert b.ber <= a.ber + 3 * math.hypot(a.stderr, b.stderr)


# penalties

def curve(xs, bers, bits=10**7):
    return [BerRecord("bpsk", 0.0, 0.0, x, bits, round(b * bits)) for x, b in zip(xs, bers)]


def test_crossing_log_linear():
    c = curve([0, 2], [1e-2, 1e-4])
    x, se = crossing(c, 1e-3)
    assert x == pytest.approx(1.0)
    assert se > 0


@given(st.floats(-5, 5), st.floats(0.1, 5))
def test_identical_and_shifted_curves(shift, step):
    xs = [0, step, 2 * step, 3 * step]
    bers = [1e-1, 1e-2, 1e-3 / 2, 1e-5]
    base = [(x, b) for x, b in zip(xs, bers)]
    moved = [(x + shift, b) for x, b in zip(xs, bers)]
    assert penalty_db(base, base) == 0.0
    assert penalty_db(base, moved) == pytest.approx(shift, abs=1e-9)


def test_penalty_with_error():
    ref = curve([0, 2, 4], [1e-1, 1e-2, 1e-4])
    test = curve([1, 3, 5], [1e-1, 1e-2, 1e-4])
    pen, err = penalty_with_error(ref, test, 1e-3)
    assert pen == pytest.approx(1.0) and err > 0


def test_out_of_range_names_curve():
    ref = curve([0, 2], [1e-1, 1e-2])
    good = curve([0, 2], [1e-2, 1e-4])
    with pytest.raises(OutOfRange, match="reference"):
        penalty_db(ref, good, 1e-3)
    with pytest.raises(OutOfRange, match="test"):
        penalty_db(good, ref, 1e-3)
    zero = curve([0, 2], [1e-2, 0.0])
    with pytest.raises(OutOfRange, match="zero BER"):
        crossing(zero, 1e-3)
