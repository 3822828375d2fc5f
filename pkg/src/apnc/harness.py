"""Monte-Carlo BER of the relay's XOR packet over (delta, phi, Eb/N0) grids.

The downlink is taken as error-free, so the XOR bit error rate at the relay
equals the average end-node BER: node A recovers B's bits as X_R XOR X_A.

Every packet draws from its own Philox stream keyed by
(seed, packet index); a sweep keys each point by (base_seed, point index).
Results therefore do not depend on evaluation order or thread count.
"""

from __future__ import annotations

import math
import os
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import bp_decoder
from .channel import ChannelParams, DELTA_EPS, add_noise, oversample_means, sample_variances
from .modulation import bits_to_indices, get_scheme
from .oracle import sync_bpsk_decide

DECODERS = ("bp", "sync_baseline")
CHUNK = 64  # packets per work unit; fixed so results never depend on threads


@dataclass(frozen=True)
class Point:
    scheme: str
    delta: float
    phi: float
    ebn0_db: float

    def params(self, n_symbols: int) -> ChannelParams:
        return ChannelParams(self.scheme, n_symbols, self.delta, self.phi, self.ebn0_db)


@dataclass(frozen=True)
class BerRecord:
    scheme: str
    delta: float
    phi: float
    ebn0_db: float
    bits: int
    errors: int

    @property
    def ber(self) -> float:
        return self.errors / self.bits

    @property
    def stderr(self) -> float:
        p = self.ber
        return math.sqrt(p * (1.0 - p) / self.bits)

    @property
    def curve_key(self) -> tuple[str, float, float]:
        return (self.scheme, self.delta, self.phi)


@dataclass(frozen=True)
class SweepConfig:
    scheme: str = "bpsk"
    deltas: Sequence[float] = (0.0,)
    phis: Sequence[float] = (0.0,)
    ebn0s: Sequence[float] = (0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0)
    packets: int = 10_000
    bits_per_packet: int = 2048
    base_seed: int = 0
    decoder: str = "bp"

    def __post_init__(self):
        scheme = get_scheme(self.scheme)
        object.__setattr__(self, "scheme", scheme.name)
        for name in ("deltas", "phis", "ebn0s"):
            vals = tuple(float(v) for v in getattr(self, name))
            if not vals:
                raise ValueError(f"{name}: at least one value required")
            object.__setattr__(self, name, vals)
        if self.packets < 1:
            raise ValueError(f"packets: must be >= 1, got {self.packets}")
        if self.bits_per_packet < 1 or self.bits_per_packet % scheme.bits_per_symbol:
            raise ValueError(
                f"bits_per_packet: must be a positive multiple of {scheme.bits_per_symbol}"
            )
        for d in self.deltas:
            if not 0.0 <= d < 1.0 - DELTA_EPS:
                raise ValueError(f"deltas: {d} outside [0, 1)")
        for p in self.phis:
            if not 0.0 <= p < 2 * math.pi:
                raise ValueError(f"phis: {p} outside [0, 2*pi)")
        if self.decoder not in DECODERS:
            raise ValueError(f"decoder: choose from {DECODERS}")
        if not 0 <= self.base_seed < 2**64:
            raise ValueError("base_seed: must fit in 64 unsigned bits")

    @property
    def n_symbols(self) -> int:
        return self.bits_per_packet // get_scheme(self.scheme).bits_per_symbol

    def points(self) -> list[Point]:
        """Grid points, delta outermost and Eb/N0 innermost."""
        return [
            Point(self.scheme, d, p, e)
            for d in self.deltas
            for p in self.phis
            for e in self.ebn0s
        ]


def packet_rng(seed, packet: int) -> np.random.Generator:
    entropy = list(seed) if isinstance(seed, (tuple, list)) else seed
    ss = np.random.SeedSequence(entropy, spawn_key=(packet,))
    return np.random.Generator(np.random.Philox(ss))


def draw_packet(rng: np.random.Generator, params: ChannelParams, bits: int):
    """Random bits for A and B pushed through the channel.

    Returns (true XOR indices, received samples).
    """
    scheme = params.scheme
    ia = bits_to_indices(rng.integers(0, 2, bits), scheme)
    ib = bits_to_indices(rng.integers(0, 2, bits), scheme)
    pts = scheme.points
    y = add_noise(oversample_means(pts[ia], pts[ib], params), params, rng)
    return scheme.xor_table[ia, ib], y


def sync_baseline(samples: np.ndarray, params: ChannelParams) -> np.ndarray:
    """Synchronous XOR rule on the even samples only, per real dimension.

    Ignores delta and phi; QPSK is decoded as two BPSK XORs.
    """
    scheme = params.scheme
    var = sample_variances(params)[1]
    var = var if var > 0 else 1e-12
    even = samples[..., 1::2]
    if scheme.bits_per_symbol == 1:
        bits = (sync_bpsk_decide(even, var) < 0).astype(np.int64)[..., None]
    else:
        # unit-energy QPSK components are +-1/sqrt(2); rescale to +-1
        r2 = math.sqrt(2.0)
        re = sync_bpsk_decide(r2 * even.real, 2 * var) < 0
        im = sync_bpsk_decide(r2 * even.imag, 2 * var) < 0
        bits = np.stack([re, im], axis=-1).astype(np.int64)
    return bits_to_indices(bits.reshape(bits.shape[:-2] + (-1,)), scheme)


def _decode(samples: np.ndarray, params: ChannelParams, decoder: str) -> np.ndarray:
    if decoder == "bp":
        return bp_decoder.decode_batch(samples, params)
    return sync_baseline(samples, params)


def _chunk_errors(point: Point, seed, start: int, stop: int, bits: int, decoder: str) -> int:
    scheme = get_scheme(point.scheme)
    params = point.params(bits // scheme.bits_per_symbol)
    truth, ys = [], []
    for pk in range(start, stop):
        t, y = draw_packet(packet_rng(seed, pk), params, bits)
        truth.append(t)
        ys.append(y)
    decoded = _decode(np.stack(ys), params, decoder)
    return int(scheme.bit_distance[decoded, np.stack(truth)].sum())


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("APNC_THREADS", "1"))
    if threads < 1:
        raise ValueError("threads must be >= 1")
    return threads


def run_point(
    point: Point,
    packets: int,
    seed,
    bits_per_packet: int = 2048,
    decoder: str = "bp",
    threads: int | None = None,
) -> BerRecord:
    threads = resolve_threads(threads)
    chunks = [(s, min(s + CHUNK, packets)) for s in range(0, packets, CHUNK)]
    if threads == 1:
        errors = [_chunk_errors(point, seed, a, b, bits_per_packet, decoder) for a, b in chunks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            errors = list(
                ex.map(lambda c: _chunk_errors(point, seed, c[0], c[1], bits_per_packet, decoder), chunks)
            )
    return BerRecord(
        scheme=point.scheme,
        delta=point.delta,
        phi=point.phi,
        ebn0_db=point.ebn0_db,
        bits=packets * bits_per_packet,
        errors=sum(errors),
    )


def sweep(config: SweepConfig, threads: int | None = None, progress=None) -> list[BerRecord]:
    out = []
    for i, point in enumerate(config.points()):
        rec = run_point(
            point,
            config.packets,
            seed=(config.base_seed, i),
            bits_per_packet=config.bits_per_packet,
            decoder=config.decoder,
            threads=threads,
        )
        if progress is not None:
            progress(rec)
        out.append(rec)
    return out


def group_curves(records: Iterable[BerRecord]) -> dict[tuple[str, float, float], list[BerRecord]]:
    """Split records into BER-vs-Eb/N0 curves keyed by (scheme, delta, phi)."""
    curves: dict = defaultdict(list)
    for r in records:
        curves[r.curve_key].append(r)
    return {k: sorted(v, key=lambda r: r.ebn0_db) for k, v in curves.items()}


class OutOfRange(ValueError):
    pass


def _as_points(curve) -> list[tuple[float, float, float]]:
    pts = []
    for c in curve:
        if isinstance(c, BerRecord):
            pts.append((c.ebn0_db, c.ber, c.stderr))
        else:
            e, b, *rest = c
            pts.append((float(e), float(b), float(rest[0]) if rest else 0.0))
    return sorted(pts)


def crossing(curve, target_ber: float, name: str = "curve") -> tuple[float, float]:
    """Eb/N0 (dB) where a BER curve first falls through ``target_ber``.

    Log-linear interpolation between the bracketing points. Returns the
    crossing and its standard error propagated from the two points' binomial
    errors.
    """
    pts = _as_points(curve)
    for (x0, b0, s0), (x1, b1, s1) in zip(pts, pts[1:]):
        if b0 >= target_ber > b1:
            if b1 <= 0:
                raise OutOfRange(f"{name}: zero BER at {x1} dB, cannot interpolate to {target_ber:g}")
            d = math.log(b1) - math.log(b0)
            u = (math.log(target_ber) - math.log(b0)) / d
            h = x1 - x0
            x = x0 + u * h
            var = h**2 * (((u - 1) / d * s0 / b0) ** 2 + (u / d * s1 / b1) ** 2)
            return x, math.sqrt(var)
    lo = min((p[1] for p in pts), default=float("nan"))
    hi = max((p[1] for p in pts), default=float("nan"))
    raise OutOfRange(
        f"{name}: BER {target_ber:g} not bracketed (curve spans {lo:g} .. {hi:g})"
    )


def penalty_db(reference, test, target_ber: float = 1e-3) -> float:
    """Extra Eb/N0 the test curve needs to reach ``target_ber``."""
    return crossing(test, target_ber, "test")[0] - crossing(reference, target_ber, "reference")[0]


def penalty_with_error(reference, test, target_ber: float = 1e-3) -> tuple[float, float]:
    xr, sr = crossing(reference, target_ber, "reference")
    xt, st = crossing(test, target_ber, "test")
    return xt - xr, math.hypot(sr, st)
