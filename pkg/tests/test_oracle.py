import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import logsumexp
from scipy.stats import norm

from apnc.channel import ChannelParams, oversample_means, transmit
from apnc.harness import Point, run_point
from apnc.modulation import BPSK, QPSK, get_scheme
from apnc.oracle import (
    MAX_ENUM_N,
    adaptive_simpson,
    brute_force_posterior,
    draw_case,
    enumerate_log_joint,
    joint_likelihood,
    node_marginal,
    pair_marginals,
    sync_bpsk_ber,
    sync_bpsk_decide,
    sync_bpsk_margin,
    sync_bpsk_threshold,
    verify_exactness,
    xor_from_pairs,
)


def instance(scheme, n, delta, phi, ebn0, seed):
    rng = np.random.default_rng(seed)
    p = ChannelParams(scheme, n, delta, phi, ebn0)
    pts = p.scheme.points
    return transmit(pts[rng.integers(0, len(pts), n)], pts[rng.integers(0, len(pts), n)], p, rng)


def itertools_pairs(y):
    """Independent enumeration: loop over every packet pair with joint_likelihood."""
    p = y.params
    m, n = p.scheme.order, p.n_symbols
    pts = p.scheme.points
    combos = list(itertools.product(range(m), repeat=2 * n))
    ll = np.array([joint_likelihood(y, pts[list(c[:n])], pts[list(c[n:])]) for c in combos])
    w = np.exp(ll - logsumexp(ll))
    out = np.zeros((n, m, m))
    for c, wk in zip(combos, w):
        for i in range(n):
            out[i, c[i], c[n + i]] += wk
    return out


# joint likelihood and enumeration

def test_joint_likelihood_recomputed():
    y = instance(QPSK, 2, 0.3, 0.8, 4.0, 0)
    p = y.params
    xa, xb = QPSK.points[[0, 3]], QPSK.points[[2, 1]]
    rot = np.exp(1j * p.phi)
    mu = [xa[0], xa[0] + xb[0] * rot, xa[1] + xb[0] * rot, xa[1] + xb[1] * rot, xb[1] * rot]
    s2 = 1 / (4 * 10 ** 0.4)
    var = [s2 / 0.3, s2 / 0.7, s2 / 0.3, s2 / 0.7, s2 / 0.3]
    want = sum(-abs(yk - m) ** 2 / (2 * v) - math.log(2 * math.pi * v)
               for yk, m, v in zip(y.samples, mu, var))
    assert joint_likelihood(y, xa, xb) == pytest.approx(want, abs=1e-12)


def test_noise_free_truth_maximises_likelihood():
    p = ChannelParams(BPSK, 3, 0.4, 1.0, math.inf)
    xa, xb = np.array([1.0, -1, 1]), np.array([-1.0, -1, 1])
    mu = oversample_means(xa, xb, p)
    from apnc.channel import SampleVector
    y = SampleVector(mu, p.replace(ebn0_db=5.0))
    best = max(
        itertools.product([1.0, -1.0], repeat=6),
        key=lambda c: joint_likelihood(y, np.array(c[:3]), np.array(c[3:])),
    )
    assert np.array_equal(best, np.concatenate([xa, xb]))
    with pytest.raises(ValueError):
        joint_likelihood(SampleVector(mu, p), xa, xb)


@pytest.mark.parametrize("seed", range(5))
def test_likelihood_symmetric_under_time_reversal(seed):
    # at phi = 0, reading the samples backwards swaps the roles of A and B
    from apnc.channel import SampleVector
    y = instance(QPSK, 3, 0.3, 0.0, 3.0, seed)
    rng = np.random.default_rng(seed)
    xa, xb = QPSK.points[rng.integers(0, 4, 3)], QPSK.points[rng.integers(0, 4, 3)]
    rev = SampleVector(y.samples[::-1], y.params)
    assert joint_likelihood(y, xa, xb) == pytest.approx(
        joint_likelihood(rev, xb[::-1], xa[::-1]), abs=1e-12
    )


@settings(max_examples=25, deadline=None)
@given(
    st.sampled_from(["bpsk", "qpsk"]), st.integers(1, 3),
    st.floats(0.0, 0.95), st.floats(0.0, 6.28), st.integers(0, 2**31),
)
def test_enumeration_matches_itertools(scheme, n, delta, phi, seed):
    if get_scheme(scheme).order ** (2 * n) > 4096:
        n = 2
    y = instance(get_scheme(scheme), n, delta, phi, 3.0, seed)
    assert np.max(np.abs(pair_marginals(y) - itertools_pairs(y))) < 1e-12


def test_enumeration_axis_order():
    y = instance(QPSK, 2, 0.3, 0.8, 4.0, 5)
    logj = enumerate_log_joint(y)
    pts = QPSK.points
    base = joint_likelihood(y, pts[[0, 0]], pts[[0, 0]]) - logj[0, 0, 0, 0]
    for a1, b1, a2, b2 in [(1, 2, 3, 0), (3, 3, 1, 2), (2, 0, 0, 1)]:
        ll = joint_likelihood(y, pts[[a1, a2]], pts[[b1, b2]])
        assert logj[a1, b1, a2, b2] + base == pytest.approx(ll, abs=1e-9)


def test_node_marginal_orientation():
    y = instance(QPSK, 3, 0.4, 1.3, 2.0, 9)
    pairs = pair_marginals(y)
    for n in range(1, 4):
        assert np.allclose(node_marginal(y, 2 * n), pairs[n - 1], atol=1e-13)
    # sample 3 holds (xA[2], xB[1]); its A marginal is pair 2's, its B marginal pair 1's
    m3 = node_marginal(y, 3)
    assert np.allclose(m3.sum(axis=1), pairs[1].sum(axis=1), atol=1e-13)
    assert np.allclose(m3.sum(axis=0), pairs[0].sum(axis=0), atol=1e-13)
    assert node_marginal(y, 1).shape == (4,) and node_marginal(y, 7).shape == (4,)


def test_enumeration_guards():
    with pytest.raises(ValueError):
        enumerate_log_joint(instance(BPSK, MAX_ENUM_N + 1, 0.5, 0.0, 3.0, 0))
    with pytest.raises(ValueError):
        enumerate_log_joint(instance(BPSK, 2, 0.5, 0.0, math.inf, 0))


def test_posterior_limits():
    y = instance(QPSK, 3, 0.4, 0.5, -60.0, 0)
    assert np.allclose(brute_force_posterior(y), 0.25, atol=1e-6)
    rng = np.random.default_rng(0)
    p = ChannelParams(QPSK, 3, 0.4, 0.5, 40.0)
    ia, ib = rng.integers(0, 4, 3), rng.integers(0, 4, 3)
    y = transmit(QPSK.points[ia], QPSK.points[ib], p, rng)
    post = brute_force_posterior(y)
    assert np.allclose(post[np.arange(3), QPSK.xor_table[ia, ib]], 1.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 4), st.floats(0, 0.9), st.floats(0, 6.2), st.integers(0, 2**31))
def test_posterior_sums_to_one(n, delta, phi, seed):
    y = instance(BPSK, n, delta, phi, 2.0, seed)
    post = brute_force_posterior(y)
    assert np.allclose(post.sum(axis=1), 1, atol=1e-12)
    assert np.allclose(pair_marginals(y).sum(axis=(1, 2)), 1, atol=1e-12)


# synchronous BPSK rule

def test_sync_rule_examples():
    assert sync_bpsk_decide(0.0, 0.5) == -1.0
    assert sync_bpsk_decide(2.0, 0.05) == 1.0
    # y = 1, sigma2 = 0.5: log(e^-1 + e^-9) - log(2 e^-1) = log1p(e^-8) - log 2
    assert float(sync_bpsk_margin(1.0, 0.5)) == pytest.approx(math.log1p(math.exp(-8)) - math.log(2), abs=1e-15)
    assert sync_bpsk_decide(1.0, 0.5) == -1.0
    assert np.array_equal(sync_bpsk_decide(np.array([0.0, 3.0]), 0.2), [-1.0, 1.0])


@given(st.floats(-8, 8), st.floats(0.01, 4))
def test_sync_rule_symmetric(y, s2):
    assert sync_bpsk_decide(y, s2) == sync_bpsk_decide(-y, s2)


@pytest.mark.parametrize("s2", [0.02, 0.1, 0.5, 2.0])
def test_threshold_closed_form(s2):
    # e^{-(t-2)^2/2s} + e^{-(t+2)^2/2s} = 2 e^{-t^2/2s} solved in t
    want = 1 + (s2 / 2) * math.log1p(math.sqrt(-math.expm1(-4 / s2)))
    assert sync_bpsk_threshold(s2) == pytest.approx(want, rel=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31), st.sampled_from([0.0, 3.0, 8.0]))
def test_sync_rule_is_enumeration_map(n, seed, ebn0):
    y = instance(BPSK, n, 0.0, 0.0, ebn0, seed)
    post = brute_force_posterior(y)
    s2 = 1 / (2 * 10 ** (ebn0 / 10))
    want = sync_bpsk_decide(y.samples[1::2], s2)
    assert np.array_equal(np.where(np.argmax(post, axis=1) == 0, 1.0, -1.0), np.atleast_1d(want))


def test_sync_rule_grid_against_enumeration():
    from apnc.channel import SampleVector
    p = ChannelParams(BPSK, 1, 0.0, 0.0, 3.0)
    s2 = 1 / (2 * 10**0.3)
    for v in np.linspace(-4, 4, 161):
        y = SampleVector([complex("nan"), v, complex("nan")], p)
        post = brute_force_posterior(y)[0]
        if abs(post[0] - post[1]) > 1e-9:
            assert (1.0 if post[0] > post[1] else -1.0) == sync_bpsk_decide(v, s2)


# quadrature BER

def closed_form_ber(ebn0_db):
    s2 = 1 / (2 * 10 ** (ebn0_db / 10))
    s = math.sqrt(s2)
    t = 1 + (s2 / 2) * math.log1p(math.sqrt(-math.expm1(-4 / s2)))
    equal_wrong = norm.cdf((t - 2) / s) - norm.cdf((-t - 2) / s)
    unequal_wrong = 2 * norm.sf(t / s)
    return 0.5 * equal_wrong + 0.5 * unequal_wrong


@pytest.mark.parametrize("ebn0", [0.0, 2.0, 4.0, 8.0, 12.0])
def test_quadrature_matches_normal_cdf(ebn0):
    assert sync_bpsk_ber(ebn0) == pytest.approx(closed_form_ber(ebn0), abs=1e-10)


def test_ber_frozen_values():
    assert sync_bpsk_ber(0.0) == pytest.approx(0.10911, abs=1e-5)
    assert sync_bpsk_ber(4.0) == pytest.approx(0.017515, abs=1e-6)
    assert sync_bpsk_ber(8.0) == pytest.approx(2.6885e-4, abs=1e-8)


def test_ber_monotone_and_vanishing():
    vals = [sync_bpsk_ber(e) for e in np.arange(-4, 18, 1.0)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert sync_bpsk_ber(25.0) < 1e-30


def test_adaptive_simpson():
    assert adaptive_simpson(math.sin, 0, math.pi, 1e-12) == pytest.approx(2.0, abs=1e-11)
    assert adaptive_simpson(math.exp, 1, 1, 1e-12) == 0.0


@pytest.mark.slow
def test_ber_matches_monte_carlo_at_8db():
    rec = run_point(Point("bpsk", 0.0, 0.0, 8.0), packets=5000, seed=(11, 0))
    want = sync_bpsk_ber(8.0)
    se = math.sqrt(want * (1 - want) / rec.bits)
    assert abs(rec.ber - want) < 3 * se


# verification driver

def test_draw_case_ranges():
    rng = np.random.default_rng(0)
    for case in (1, 2, 3, 4):
        for _ in range(50):
            d, phi = draw_case(case, rng)
            assert (d == 0) == (case in (1, 3))
            assert (phi == 0) == (case in (1, 2))
            ChannelParams(BPSK, 1, d, phi, 0.0)


def test_verify_small_and_fault_injection():
    ok = verify_exactness(max_n=3, trials=5)
    assert ok.passed and ok.instances == 2 * 3 * 4 * 3 * 5
    bad = verify_exactness(max_n=2, trials=2, flip_evidence=True)
    assert not bad.passed and bad.worst["deviation"] > 1e-3
    with pytest.raises(ValueError):
        verify_exactness(max_n=MAX_ENUM_N + 1)


def test_xor_from_pairs_coset_sums():
    pairs = np.arange(16, dtype=float).reshape(1, 4, 4)
    out = xor_from_pairs(pairs, QPSK)[0]
    t = QPSK.xor_table
    for c in range(4):
        assert out[c] == pairs[0][t == c].sum()
