"""Asynchronous two-user uplink with integrate-and-dump oversampling.

Packet A arrives first; packet B lags by ``delta`` symbol periods and is
rotated by ``phi``. Each symbol period is split into a delta-long and a
(1 - delta)-long window, giving 2N + 1 samples per packet pair:

    y[2n-1] = xA[n] + xB[n-1] e^{j phi} + w      var sigma2 / delta
    y[2n]   = xA[n] + xB[n]   e^{j phi} + w      var sigma2 / (1 - delta)
    y[2N+1] =          xB[N]  e^{j phi} + w      var sigma2 / delta

with xB[0] = 0. Sample indices in code are 0-based, so sample k here is
``samples[k - 1]``. Variances are per real component.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .modulation import ModScheme, get_scheme

# offsets closer than this to 0 are treated as symbol-aligned
DELTA_EPS = 1e-9


@dataclass(frozen=True)
class ChannelParams:
    scheme: ModScheme
    n_symbols: int
    delta: float
    phi: float
    ebn0_db: float

    def __post_init__(self):
        object.__setattr__(self, "scheme", get_scheme(self.scheme))
        if int(self.n_symbols) != self.n_symbols or self.n_symbols < 1:
            raise ValueError(f"n_symbols must be a positive integer, got {self.n_symbols}")
        object.__setattr__(self, "n_symbols", int(self.n_symbols))
        d = float(self.delta)
        if not 0.0 <= d < 1.0 - DELTA_EPS:
            raise ValueError(f"delta must lie in [0, 1), got {self.delta}")
        if d < DELTA_EPS:
            d = 0.0
        object.__setattr__(self, "delta", d)
        phi = float(self.phi)
        if not 0.0 <= phi < 2 * math.pi:
            raise ValueError(f"phi must lie in [0, 2*pi), got {self.phi}")
        object.__setattr__(self, "phi", phi)
        ebn0 = float(self.ebn0_db)
        if math.isnan(ebn0) or ebn0 == -math.inf:
            raise ValueError(f"ebn0_db must be a number or +inf, got {self.ebn0_db}")
        object.__setattr__(self, "ebn0_db", ebn0)

    @property
    def n_samples(self) -> int:
        return 2 * self.n_symbols + 1

    @property
    def aligned(self) -> bool:
        """True when the packets are symbol-aligned and odd samples carry nothing."""
        return self.delta == 0.0

    @property
    def noise_free(self) -> bool:
        return self.ebn0_db == math.inf

    @property
    def rotation(self) -> complex:
        return complex(np.exp(1j * self.phi))

    def replace(self, **changes) -> "ChannelParams":
        kw = dict(
            scheme=self.scheme,
            n_symbols=self.n_symbols,
            delta=self.delta,
            phi=self.phi,
            ebn0_db=self.ebn0_db,
        )
        kw.update(changes)
        return ChannelParams(**kw)


def sigma2_base(params: ChannelParams) -> float:
    """Per-component noise variance before oversampling, for unit-energy symbols.

    Bits carry equal energy in both schemes, so Es/Eb = bits_per_symbol.
    """
    if params.noise_free:
        raise ValueError("sigma2 is zero at infinite Eb/N0; use the noise-free path")
    ebn0 = 10.0 ** (params.ebn0_db / 10.0)
    return 1.0 / (2.0 * params.scheme.bits_per_symbol * ebn0)


def sample_variances(params: ChannelParams) -> np.ndarray:
    """Per-component noise variance of each of the 2N + 1 samples.

    Odd samples (1-based) of an aligned channel get ``inf``; a noise-free
    channel gives zeros elsewhere.
    """
    k = params.n_samples
    out = np.empty(k)
    base = 0.0 if params.noise_free else sigma2_base(params)
    odd = slice(0, k, 2)  # samples 1, 3, ..., 2N+1
    even = slice(1, k, 2)
    out[odd] = math.inf if params.aligned else base / params.delta
    out[even] = base / (1.0 - params.delta)
    return out


def oversample_means(x_a, x_b, params: ChannelParams) -> np.ndarray:
    x_a = np.asarray(x_a, dtype=np.complex128)
    x_b = np.asarray(x_b, dtype=np.complex128)
    n = params.n_symbols
    if x_a.shape[-1] != n or x_b.shape[-1] != n:
        raise ValueError(
            f"packets must have {n} symbols, got {x_a.shape[-1]} and {x_b.shape[-1]}"
        )
    rb = x_b * params.rotation
    shape = np.broadcast_shapes(x_a.shape, x_b.shape)[:-1] + (2 * n + 1,)
    out = np.zeros(shape, dtype=np.complex128)
    out[..., 0:2 * n:2] = x_a
    out[..., 2:2 * n + 1:2] += rb
    out[..., 1:2 * n:2] = x_a + rb
    return out


@dataclass(frozen=True)
class SampleVector:
    """The 2N + 1 oversampled receptions at the relay.

    Samples the channel cannot deliver (odd samples when aligned) are NaN.
    """

    samples: np.ndarray
    params: ChannelParams

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.complex128)
        if s.shape != (self.params.n_samples,):
            raise ValueError(
                f"expected {self.params.n_samples} samples, got shape {s.shape}"
            )
        object.__setattr__(self, "samples", s)

    @property
    def usable(self) -> np.ndarray:
        return ~np.isnan(self.samples)

    def __len__(self):
        return len(self.samples)

    def to_dict(self) -> dict:
        p = self.params
        return {
            "scheme": p.scheme.name,
            "n_symbols": p.n_symbols,
            "delta": p.delta,
            "phi": p.phi,
            "ebn0_db": p.ebn0_db,
            "samples": [
                [None, None] if np.isnan(z) else [z.real, z.imag] for z in self.samples
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SampleVector":
        params = ChannelParams(
            scheme=d["scheme"],
            n_symbols=d["n_symbols"],
            delta=d["delta"],
            phi=d["phi"],
            ebn0_db=d["ebn0_db"],
        )
        samples = np.array(
            [
                complex(math.nan, math.nan) if re is None else complex(re, im)
                for re, im in d["samples"]
            ],
            dtype=np.complex128,
        )
        return cls(samples, params)


def add_noise(means: np.ndarray, params: ChannelParams, rng: np.random.Generator) -> np.ndarray:
    """Add the sample-dependent AWGN to a block of means (last axis = samples).

    Real and imaginary parts get independent draws for every sample, usable
    or not, so the stream consumed depends only on the block shape.
    """
    var = sample_variances(params)
    out = np.array(means, dtype=np.complex128)
    if not params.noise_free:
        usable = np.isfinite(var)
        sd = np.sqrt(np.where(usable, var, 0.0))
        noise = rng.standard_normal((2,) + out.shape)
        out.real += sd * noise[0]
        out.imag += sd * noise[1]
    if params.aligned:
        out[..., 0::2] = complex(math.nan, math.nan)
    return out


def transmit(x_a, x_b, params: ChannelParams, rng: np.random.Generator) -> SampleVector:
    return SampleVector(add_noise(oversample_means(x_a, x_b, params), params, rng), params)
