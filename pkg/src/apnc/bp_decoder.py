"""Exact sum-product decoding of the XOR of two asynchronous packets.

The 2N + 1 samples form a chain. Sample k (1-based) constrains the pair
(xA[ceil(k/2)], xB[floor(k/2)]); neighbouring samples share one symbol, so
one right-bound and one left-bound sweep give exact per-pair posteriors.

Everything is stored in the log domain as (M, M) grids indexed by
(alphabet index of A symbol, alphabet index of B symbol). Sample 1 has no B
symbol and sample 2N + 1 has no A symbol; their grids are constant along
the missing axis, which leaves every message on the shared symbol unchanged.

Array indices are 0-based: node ``j`` holds sample ``j + 1``. Node ``j``
shares its A symbol with node ``j + 1`` when ``j`` is even and its B symbol
when ``j`` is odd.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .channel import ChannelParams, SampleVector, sample_variances
from .modulation import ModScheme

# squared distance below which a noise-free sample counts as an exact match
_EXACT_D2 = 1e-18


@numba.njit(cache=True, nogil=True)
def _lse(v):
    m = -np.inf
    for x in v.flat:
        if x > m:
            m = x
    if m == -np.inf:
        return m
    s = 0.0
    for x in v.flat:
        s += math.exp(x - m)
    return m + math.log(s)


@numba.njit(cache=True, nogil=True)
def _node_log_evidence(y, mu, var, out):
    """Unnormalised log-likelihood of sample ``y`` for every mean in ``mu``."""
    m = mu.shape[0]
    if var == np.inf:
        out[:, :] = 0.0
        return
    for a in range(m):
        for b in range(m):
            dr = y.real - mu[a, b].real
            di = y.imag - mu[a, b].imag
            d2 = dr * dr + di * di
            if var > 0.0:
                out[a, b] = -d2 / (2.0 * var)
            elif d2 <= _EXACT_D2:
                out[a, b] = 0.0
            else:
                out[a, b] = -np.inf


@numba.njit(cache=True, nogil=True)
def _evidence_grid(y, mu_first, mu_mid, mu_last, var):
    """Max-normalised log evidence for every node, shape (K, M, M)."""
    k_nodes = y.shape[0]
    m = mu_mid.shape[0]
    out = np.empty((k_nodes, m, m))
    for j in range(k_nodes):
        if j == 0:
            mu = mu_first
        elif j == k_nodes - 1:
            mu = mu_last
        else:
            mu = mu_mid
        row = out[j]
        _node_log_evidence(y[j], mu, var[j], row)
        mx = -np.inf
        for a in range(m):
            for b in range(m):
                if row[a, b] > mx:
                    mx = row[a, b]
        if mx > -np.inf:
            for a in range(m):
                for b in range(m):
                    row[a, b] -= mx
    return out


@numba.njit(cache=True, nogil=True)
def _lse_into(row, m):
    mx = -np.inf
    for i in range(m):
        if row[i] > mx:
            mx = row[i]
    if mx == -np.inf:
        return mx
    s = 0.0
    for i in range(m):
        s += math.exp(row[i] - mx)
    return mx + math.log(s)


@numba.njit(cache=True, nogil=True)
def _max_shift(row, m):
    mx = -np.inf
    for i in range(m):
        if row[i] > mx:
            mx = row[i]
    if mx > -np.inf:
        for i in range(m):
            row[i] -= mx


@numba.njit(cache=True, nogil=True)
def _forward(logp):
    """Right-bound messages, shape (K, M).

    Row ``j`` is the log distribution (max-shifted to 0, not normalised) of
    the symbol node ``j`` shares with node ``j - 1`` given all samples before
    node ``j``: the B symbol for even ``j``, the A symbol for odd ``j``.
    Row 0 is uniform.
    """
    k_nodes, m, _ = logp.shape
    f = np.empty((k_nodes, m))
    f[0, :] = 0.0
    tmp = np.empty(m)
    for j in range(k_nodes - 1):
        if j % 2 == 0:
            for a in range(m):
                for b in range(m):
                    tmp[b] = logp[j, a, b] + f[j, b]
                f[j + 1, a] = _lse_into(tmp, m)
        else:
            for b in range(m):
                for a in range(m):
                    tmp[a] = logp[j, a, b] + f[j, a]
                f[j + 1, b] = _lse_into(tmp, m)
        _max_shift(f[j + 1], m)
    return f


@numba.njit(cache=True, nogil=True)
def _backward(logp):
    """Left-bound messages, shape (K, M).

    Row ``j`` is the max-shifted log distribution of the symbol node ``j``
    shares with node ``j + 1`` given all samples after node ``j``: the A
    symbol for even ``j``, the B symbol for odd ``j``. The last row is uniform.
    """
    k_nodes, m, _ = logp.shape
    g = np.empty((k_nodes, m))
    g[k_nodes - 1, :] = 0.0
    tmp = np.empty(m)
    for j in range(k_nodes - 1, 0, -1):
        if j % 2 == 1:
            for a in range(m):
                for b in range(m):
                    tmp[b] = logp[j, a, b] + g[j, b]
                g[j - 1, a] = _lse_into(tmp, m)
        else:
            for b in range(m):
                for a in range(m):
                    tmp[a] = logp[j, a, b] + g[j, a]
                g[j - 1, b] = _lse_into(tmp, m)
        _max_shift(g[j - 1], m)
    return g


@numba.njit(cache=True, nogil=True)
def _beliefs(logp, f, g):
    """Normalised log posteriors at the nodes holding (xA[n], xB[n]), shape (N, M, M)."""
    k_nodes, m, _ = logp.shape
    n = (k_nodes - 1) // 2
    out = np.empty((n, m, m))
    for i in range(n):
        j = 2 * i + 1
        mx = -np.inf
        for a in range(m):
            for b in range(m):
                x = logp[j, a, b] + f[j, a] + g[j, b]
                out[i, a, b] = x
                if x > mx:
                    mx = x
        s = 0.0
        for a in range(m):
            for b in range(m):
                s += math.exp(out[i, a, b] - mx)
        z = mx + math.log(s)
        for a in range(m):
            for b in range(m):
                out[i, a, b] -= z
    return out


@numba.njit(cache=True, nogil=True)
def _xor_log_posterior(belief, xor_table, out):
    m = belief.shape[0]
    for c in range(m):
        out[c] = -np.inf
    for a in range(m):
        for b in range(m):
            c = xor_table[a, b]
            x = belief[a, b]
            o = out[c]
            if x == -np.inf:
                continue
            if o == -np.inf:
                out[c] = x
            elif x > o:
                out[c] = x + math.log1p(math.exp(o - x))
            else:
                out[c] = o + math.log1p(math.exp(x - o))


@numba.njit(cache=True, nogil=True)
def _decode_block(ys, mu_first, mu_mid, mu_last, var, xor_table):
    """XOR-MAP indices for a block of packets, shape (B, N)."""
    n_packets, k_nodes = ys.shape
    m = mu_mid.shape[0]
    n = (k_nodes - 1) // 2
    out = np.empty((n_packets, n), dtype=np.int64)
    post = np.empty(m)
    for p in range(n_packets):
        logp = _evidence_grid(ys[p], mu_first, mu_mid, mu_last, var)
        bel = _beliefs(logp, _forward(logp), _backward(logp))
        for i in range(n):
            post[:] = 0.0
            for a in range(m):
                for b in range(m):
                    post[xor_table[a, b]] += math.exp(bel[i, a, b])
            best = 0
            for c in range(1, m):
                if post[c] > post[best]:
                    best = c
            out[p, i] = best
    return out


def node_means(params: ChannelParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Noise-free sample values for every hypothesis: first, interior and last node grids."""
    s = params.scheme.points
    rb = s * params.rotation
    m = len(s)
    mid = s[:, None] + rb[None, :]
    first = np.repeat(s[:, None], m, axis=1)
    last = np.repeat(rb[None, :], m, axis=0)
    return first, mid, last


@dataclass(frozen=True)
class EvidenceVector:
    """Normalised log-likelihood of one sample over the symbols it depends on.

    Interior nodes carry an (M, M) array over (A symbol, B symbol). Node 1
    only sees an A symbol and node 2N + 1 only a B symbol, so their arrays
    have M entries.
    """

    k: int
    log_weights: np.ndarray

    @property
    def grid(self) -> np.ndarray:
        w = self.log_weights
        if w.ndim == 2:
            return w
        m = len(w)
        g = w[:, None] if self.k == 1 else w[None, :]
        return np.broadcast_to(g, (m, m)) - math.log(m)


def _as_samples(y) -> tuple[np.ndarray, ChannelParams]:
    if isinstance(y, SampleVector):
        return y.samples, y.params
    raise TypeError("expected a SampleVector")


def compute_evidence(y: complex, k: int, params: ChannelParams) -> EvidenceVector:
    """Evidence of sample ``k`` (1-based) about the symbols it overlaps."""
    n_nodes = params.n_samples
    if not 1 <= k <= n_nodes:
        raise ValueError(f"node index must be in [1, {n_nodes}], got {k}")
    first, mid, last = node_means(params)
    mu = first if k == 1 else last if k == n_nodes else mid
    var = sample_variances(params)[k - 1]
    out = np.empty(mu.shape)
    _node_log_evidence(complex(y), mu, var, out)
    if k == 1:
        w = out[:, 0]
    elif k == n_nodes:
        w = out[0, :]
    else:
        w = out
    return EvidenceVector(k, w - _lse(w))


def evidence_grid(y: SampleVector) -> np.ndarray:
    """Log evidence of every node as (2N + 1, M, M) grids, max-normalised."""
    samples, params = _as_samples(y)
    first, mid, last = node_means(params)
    return _evidence_grid(samples, first, mid, last, sample_variances(params))


def normalize(logw: np.ndarray) -> np.ndarray:
    """Shift a log-weight array (last two axes) so its probabilities sum to one."""
    mx = logw.max(axis=(-2, -1), keepdims=True)
    s = np.log(np.exp(logw - mx).sum(axis=(-2, -1), keepdims=True))
    return logw - mx - s


def _expand(msgs: np.ndarray, a_rows_odd: bool) -> np.ndarray:
    k, m = msgs.shape
    grid = np.empty((k, m, m))
    odd = np.arange(k) % 2 == 1
    on_a = odd if a_rows_odd else ~odd
    grid[on_a] = msgs[on_a][:, :, None]
    grid[~on_a] = msgs[~on_a][:, None, :]
    return normalize(grid)


def forward_pass(evidence: np.ndarray) -> np.ndarray:
    """Right-bound message into each node as (K, M, M) log grids (uniform into node 1)."""
    return _expand(_forward(np.ascontiguousarray(evidence, dtype=np.float64)), True)


def backward_pass(evidence: np.ndarray) -> np.ndarray:
    """Left-bound message into each node as (K, M, M) log grids (uniform into node 2N + 1)."""
    return _expand(_backward(np.ascontiguousarray(evidence, dtype=np.float64)), False)


def outgoing(evidence: np.ndarray, incoming: np.ndarray) -> np.ndarray:
    """Node outputs: evidence combined with the incoming message, normalised."""
    return normalize(evidence + incoming)


def beliefs(evidence: np.ndarray, fwd: np.ndarray, bwd: np.ndarray) -> np.ndarray:
    """Log posterior of (xA[n], xB[n]) for n = 1..N, shape (N, M, M)."""
    b = np.asarray(evidence)[1::2] + np.asarray(fwd)[1::2] + np.asarray(bwd)[1::2]
    return normalize(b)


def xor_posterior(log_beliefs: np.ndarray, scheme: ModScheme) -> np.ndarray:
    """Probability of each XOR symbol, summed over its coset of pairs."""
    table = scheme.xor_table
    p = np.exp(np.asarray(log_beliefs))
    out = np.zeros(p.shape[:-2] + (scheme.order,))
    for a in range(scheme.order):
        for b in range(scheme.order):
            out[..., table[a, b]] += p[..., a, b]
    return out


def decode_xor(log_beliefs: np.ndarray, scheme: ModScheme) -> np.ndarray:
    """XOR-MAP alphabet indices; ties go to the lowest index."""
    post = np.empty(scheme.order)
    table = scheme.xor_table
    out = np.empty(len(log_beliefs), dtype=np.int64)
    for i, bel in enumerate(np.asarray(log_beliefs, dtype=np.float64)):
        _xor_log_posterior(bel, table, post)
        out[i] = int(np.argmax(post))
    return out


@dataclass(frozen=True)
class DecodeResult:
    indices: np.ndarray
    posterior: np.ndarray
    scheme: ModScheme

    @property
    def symbols(self) -> np.ndarray:
        return self.scheme.points[self.indices]

    @property
    def bits(self) -> np.ndarray:
        from .modulation import indices_to_bits

        return indices_to_bits(self.indices, self.scheme)


def decode_packet(y: SampleVector) -> DecodeResult:
    """One right-bound and one left-bound sweep, then XOR-MAP per symbol."""
    samples, params = _as_samples(y)
    logp = evidence_grid(y)
    bel = _beliefs(logp, _forward(logp), _backward(logp))
    return DecodeResult(
        indices=decode_xor(bel, params.scheme),
        posterior=xor_posterior(bel, params.scheme),
        scheme=params.scheme,
    )


def decode_batch(samples: np.ndarray, params: ChannelParams) -> np.ndarray:
    """XOR-MAP indices for many packets at once, shape (B, N). Releases the GIL."""
    samples = np.ascontiguousarray(samples, dtype=np.complex128)
    if samples.ndim != 2 or samples.shape[1] != params.n_samples:
        raise ValueError(f"expected shape (B, {params.n_samples}), got {samples.shape}")
    first, mid, last = node_means(params)
    return _decode_block(
        samples, first, mid, last, sample_variances(params), params.scheme.xor_table
    )
