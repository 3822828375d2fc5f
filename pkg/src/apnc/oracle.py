"""Reference decoders used to check the message-passing decoder.

* exhaustive enumeration of every packet pair (small N only),
* the synchronous BPSK XOR decision rule on a single aligned sample,
* a quadrature BER for that synchronous rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .channel import (
    ChannelParams,
    SampleVector,
    oversample_means,
    sample_variances,
    sigma2_base,
    transmit,
)
from .modulation import BPSK, ModScheme, get_scheme

MAX_ENUM_N = 6


def joint_likelihood(y: SampleVector, x_a, x_b, params: ChannelParams | None = None) -> float:
    """Log-density of the received samples given both packets.

    Samples with infinite variance (odd samples of an aligned channel) are skipped.
    """
    params = params or y.params
    var = sample_variances(params)
    mu = oversample_means(x_a, x_b, params)
    use = np.isfinite(var)
    if np.any(var[use] <= 0):
        raise ValueError("joint likelihood is a point mass at infinite Eb/N0")
    d2 = np.abs(y.samples[use] - mu[use]) ** 2
    return float(np.sum(-d2 / (2 * var[use]) - np.log(2 * np.pi * var[use])))


def _sample_terms(y: SampleVector) -> list[tuple[int, int | None, int | None, np.ndarray]]:
    """(sample index, A position, B position, log-likelihood table) per usable sample.

    Positions are 0-based symbol indices; the table is indexed [a, b] or [a]
    or [b] when only one symbol is present.
    """
    params = y.params
    s = params.scheme.points
    rot = np.exp(1j * params.phi)
    n = params.n_symbols
    var = sample_variances(params)
    terms = []
    for i, (yk, vk) in enumerate(zip(y.samples, var)):
        if not np.isfinite(vk):
            continue
        k = i + 1
        pa = (k + 1) // 2 - 1 if k <= 2 * n else None
        pb = k // 2 - 1 if k >= 2 else None
        if pa is not None and pb is not None:
            mu = s[:, None] + s[None, :] * rot
        elif pa is not None:
            mu = s
        else:
            mu = s * rot
        terms.append((i, pa, pb, -np.abs(yk - mu) ** 2 / (2 * vk)))
    return terms


def enumerate_log_joint(y: SampleVector, use: np.ndarray | None = None) -> np.ndarray:
    """Unnormalised log posterior over every packet pair.

    Axes are interleaved (xA[1], xB[1], ..., xA[N], xB[N]), each of size M. ``use``
    optionally restricts which samples (0-based boolean mask) are conditioned on.

    Sample k introduces the k-th axis, so the tensor is grown one axis at a
    time, each new sample's table broadcast against the previous last axis.
    """
    params = y.params
    n, m = params.n_symbols, params.scheme.order
    if n > MAX_ENUM_N:
        raise ValueError(f"enumeration over {m}**{2 * n} pairs refused; N must be <= {MAX_ENUM_N}")
    if params.noise_free:
        raise ValueError("enumeration needs finite Eb/N0")
    keep = np.ones(params.n_samples, bool) if use is None else np.asarray(use, bool)
    tables = {i: t for i, _, _, t in _sample_terms(y) if keep[i]}
    out = tables.get(0, np.zeros(m))
    for i in range(1, 2 * n):
        t = tables.get(i, np.zeros((m, m)))
        # oriented as [previous axis, new axis]; odd i adds a B axis after its A
        out = out[..., None] + (t if i % 2 else t.T)
    return out + tables.get(2 * n, 0.0)


def _normalised(logj: np.ndarray) -> np.ndarray:
    """Probabilities from log weights, computed in place."""
    p = np.subtract(logj, logj.max(), out=logj)
    np.exp(p, out=p)
    p /= p.sum()
    return p


def pair_marginals(y: SampleVector, use: np.ndarray | None = None) -> np.ndarray:
    """P(xA[n], xB[n] | samples) for every n by enumeration, shape (N, M, M)."""
    n = y.params.n_symbols
    m = y.params.scheme.order
    logj = enumerate_log_joint(y, use)
    p = np.exp(np.subtract(logj, logj.max(), out=logj), out=logj).reshape(-1, m * m)
    out = np.empty((n, m, m))
    # peel pairs off the end: the last pair's marginal sums out everything
    # before it, and summing it out leaves the joint of the earlier pairs
    for i in range(n - 1, -1, -1):
        out[i] = p.sum(axis=0).reshape(m, m)
        if i:
            p = p.sum(axis=1).reshape(-1, m * m)
    return out / out.sum(axis=(1, 2), keepdims=True)


def node_marginal(y: SampleVector, k: int, use: np.ndarray | None = None) -> np.ndarray:
    """Posterior of the symbols under sample ``k`` (1-based) by enumeration.

    Returns an (M, M) array over (xA[ceil(k/2)], xB[floor(k/2)]) for interior
    samples and an M-vector for the first (A only) and last (B only) samples.
    """
    n = y.params.n_symbols
    p = _normalised(enumerate_log_joint(y, use))
    keep = []
    if k <= 2 * n:
        keep.append(2 * ((k + 1) // 2 - 1))
    if k >= 2:
        keep.append(2 * (k // 2 - 1) + 1)
    others = tuple(ax for ax in range(2 * n) if ax not in keep)
    out = p.sum(axis=others)
    return out.T if len(keep) == 2 and keep[1] < keep[0] else out


def xor_from_pairs(pairs: np.ndarray, scheme: ModScheme) -> np.ndarray:
    table = scheme.xor_table
    out = np.zeros(pairs.shape[:-2] + (scheme.order,))
    for a in range(scheme.order):
        for b in range(scheme.order):
            out[..., table[a, b]] += pairs[..., a, b]
    return out


def brute_force_posterior(y: SampleVector) -> np.ndarray:
    """P(xA[n] XOR xB[n] = c | all samples) for every n and c, shape (N, M)."""
    return xor_from_pairs(pair_marginals(y), y.params.scheme)


def sync_bpsk_margin(y_even, sigma2: float):
    """Log-odds of 'bits equal' against 'bits differ' for an aligned in-phase BPSK sample.

    Equal bits give mean +-2, unequal bits mean 0 (two pairs, hence the log 2).
    Only the real part is used.
    """
    y = np.real(np.asarray(y_even, dtype=np.complex128))
    same = np.logaddexp(-((y - 2.0) ** 2) / (2 * sigma2), -((y + 2.0) ** 2) / (2 * sigma2))
    return same - (math.log(2.0) - y**2 / (2 * sigma2))


def sync_bpsk_decide(y_even, sigma2: float):
    """XOR symbol (+1 bits equal, -1 bits differ) per sample; ties favour +1."""
    out = np.where(sync_bpsk_margin(y_even, sigma2) >= 0, 1.0, -1.0)
    return float(out) if out.ndim == 0 else out


def adaptive_simpson(f, a: float, b: float, tol: float, max_depth: int = 60) -> float:
    def simpson(fa, fm, fb, lo, hi):
        return (hi - lo) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(lo, hi, fa, fm, fb, whole, eps, depth):
        mid = 0.5 * (lo + hi)
        lm, rm = 0.5 * (lo + mid), 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, lo, mid)
        right = simpson(fm, frm, fb, mid, hi)
        delta = left + right - whole
        if depth <= 0 or abs(delta) <= 15.0 * eps:
            return left + right + delta / 15.0
        return recurse(lo, mid, fa, flm, fm, left, eps / 2, depth - 1) + recurse(
            mid, hi, fm, frm, fb, right, eps / 2, depth - 1
        )

    if b <= a:
        return 0.0
    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    return recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, a, b), tol, max_depth)


def sync_bpsk_threshold(sigma2: float) -> float:
    """|y| above which the synchronous rule decides 'bits equal'."""

    def g(y):
        return float(sync_bpsk_margin(y, sigma2))

    hi = 2.0
    while g(hi) < 0:
        hi *= 2.0
    return brentq(g, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def sync_bpsk_ber(ebn0_db: float, tol: float = 1e-10) -> float:
    """BER of the XOR bit under the synchronous rule, by quadrature over its decision regions."""
    sigma2 = sigma2_base(ChannelParams(BPSK, 1, 0.0, 0.0, ebn0_db))
    sd = math.sqrt(sigma2)
    t = sync_bpsk_threshold(sigma2)

    def density(mean):
        c = 1.0 / math.sqrt(2 * math.pi * sigma2)
        return lambda y: c * math.exp(-((y - mean) ** 2) / (2 * sigma2))

    span = 12.0 * sd
    # equal bits (mean +2; mean -2 is its mirror image): wrong when |y| < t
    lo, hi = max(-t, 2.0 - span), min(t, 2.0 + span)
    p_equal_wrong = adaptive_simpson(density(2.0), lo, hi, tol / 4)
    # unequal bits (mean 0): wrong when |y| >= t, two symmetric tails
    p_unequal_wrong = 2.0 * adaptive_simpson(density(0.0), t, max(t, span), tol / 4)
    return 0.5 * p_equal_wrong + 0.5 * p_unequal_wrong


# exactness check of the message-passing decoder against enumeration

CASES = {
    1: "delta = 0, phi = 0",
    2: "delta != 0, phi = 0",
    3: "delta = 0, phi != 0",
    4: "delta != 0, phi != 0",
}


def draw_case(case: int, rng: np.random.Generator) -> tuple[float, float]:
    """Random (delta, phi) belonging to one of the four synchrony cases."""
    delta = rng.uniform(0.02, 0.98) if case in (2, 4) else 0.0
    phi = rng.uniform(0.02, 2 * np.pi - 0.02) if case in (3, 4) else 0.0
    return delta, phi


@dataclass
class VerifyReport:
    instances: int = 0
    max_deviation: float = 0.0
    worst: dict = field(default_factory=dict)
    tolerance: float = 1e-9

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance


def verify_exactness(
    max_n: int = 5,
    cases=(1, 2, 3, 4),
    trials: int = 200,
    seed: int = 0,
    schemes=("bpsk", "qpsk"),
    ebn0s=(0.0, 6.0, 12.0),
    tolerance: float = 1e-9,
    flip_evidence: bool = False,
) -> VerifyReport:
    """Compare decoder beliefs with enumerated posteriors on random instances.

    ``flip_evidence`` negates the decoder's log evidence; it exists to prove
    the check can fail.
    """
    from . import bp_decoder as bp

    if not 1 <= max_n <= MAX_ENUM_N:
        raise ValueError(f"max_n must be in [1, {MAX_ENUM_N}]")
    report = VerifyReport(tolerance=tolerance)
    root = np.random.SeedSequence(seed)
    for scheme_name in schemes:
        scheme = get_scheme(scheme_name)
        for n in range(1, max_n + 1):
            for case in cases:
                for ebn0 in ebn0s:
                    for t in range(trials):
                        key = (scheme.order, n, case, int(round(ebn0 * 1000)), t)
                        rng = np.random.default_rng(np.random.SeedSequence(root.entropy, spawn_key=key))
                        delta, phi = draw_case(case, rng)
                        params = ChannelParams(scheme, n, delta, phi, ebn0)
                        ia = rng.integers(0, scheme.order, n)
                        ib = rng.integers(0, scheme.order, n)
                        y = transmit(scheme.points[ia], scheme.points[ib], params, rng)
                        logp = bp.evidence_grid(y)
                        if flip_evidence:
                            logp = -logp
                        got = np.exp(bp.beliefs(logp, bp.forward_pass(logp), bp.backward_pass(logp)))
                        want = pair_marginals(y)
                        dev = float(np.max(np.abs(got - want)))
                        report.instances += 1
                        if dev > report.max_deviation or not report.worst:
                            report.max_deviation = max(dev, report.max_deviation)
                            report.worst = dict(
                                seed=seed, key=key, scheme=scheme.name, n=n, case=case,
                                delta=delta, phi=phi, ebn0_db=ebn0, deviation=dev,
                            )
    return report
