"""BPSK/QPSK alphabets, bit labelling and the symbol-level XOR used for PNC mapping.

Symbols are unit-energy. Bit 0 maps to +1 on each real dimension, so QPSK is
two BPSK labellings stacked on the in-phase and quadrature components:
the first bit rides on Re, the second on Im.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

_R2 = np.sqrt(2.0)


class Kind(enum.Enum):
    BPSK = "bpsk"
    QPSK = "qpsk"


@dataclass(frozen=True)
class ModScheme:
    """A modulation alphabet together with its bit labels.

    ``alphabet[i]`` carries the bit word ``labels[i]``. The ordering is fixed and
    is also the axis ordering of every probability vector in the decoder.
    """

    kind: Kind
    bits_per_symbol: int
    alphabet: tuple[complex, ...]
    labels: tuple[tuple[int, ...], ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.alphabet) != 2**self.bits_per_symbol:
            raise ValueError("alphabet size must be 2**bits_per_symbol")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("bit labels must be distinct")
        object.__setattr__(self, "_index", {w: i for i, w in enumerate(self.labels)})

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def order(self) -> int:
        return len(self.alphabet)

    @property
    def points(self) -> np.ndarray:
        return np.array(self.alphabet, dtype=np.complex128)

    @property
    def label_array(self) -> np.ndarray:
        return np.array(self.labels, dtype=np.int8)

    def index_of_word(self, word: Sequence[int]) -> int:
        word = tuple(int(b) for b in word)
        if len(word) != self.bits_per_symbol:
            raise ValueError(
                f"{self.name} words have {self.bits_per_symbol} bit(s), got {len(word)}"
            )
        try:
            return self._index[word]
        except KeyError:
            raise ValueError(f"not a bit word: {word!r}") from None

    def index_of_symbol(self, s: complex) -> int:
        s = complex(s)
        for i, p in enumerate(self.alphabet):
            if p == s:
                return i
        raise ValueError(f"{s!r} is not a {self.name} symbol")

    @property
    def xor_table(self) -> np.ndarray:
        """``xor_table[i, j]`` is the alphabet index of ``alphabet[i] XOR alphabet[j]``."""
        lab = self.label_array
        m = self.order
        out = np.empty((m, m), dtype=np.int64)
        for i in range(m):
            for j in range(m):
                out[i, j] = self._index[tuple(int(v) for v in lab[i] ^ lab[j])]
        return out

    @property
    def bit_distance(self) -> np.ndarray:
        """Hamming distance between the labels of every pair of alphabet entries."""
        lab = self.label_array
        return (lab[:, None, :] != lab[None, :, :]).sum(axis=-1)


BPSK = ModScheme(
    kind=Kind.BPSK,
    bits_per_symbol=1,
    alphabet=(1.0 + 0j, -1.0 + 0j),
    labels=((0,), (1,)),
)

QPSK = ModScheme(
    kind=Kind.QPSK,
    bits_per_symbol=2,
    alphabet=(
        complex(1, 1) / _R2,
        complex(-1, 1) / _R2,
        complex(-1, -1) / _R2,
        complex(1, -1) / _R2,
    ),
    labels=((0, 0), (1, 0), (1, 1), (0, 1)),
)

SCHEMES = {"bpsk": BPSK, "qpsk": QPSK}


def get_scheme(name: str | ModScheme) -> ModScheme:
    if isinstance(name, ModScheme):
        return name
    try:
        return SCHEMES[name.lower()]
    except KeyError:
        raise ValueError(f"unknown scheme {name!r}; choose from {sorted(SCHEMES)}") from None


def bits_to_symbol(word: Sequence[int], scheme: ModScheme) -> complex:
    return scheme.alphabet[scheme.index_of_word(word)]


def symbol_to_bits(s: complex, scheme: ModScheme) -> tuple[int, ...]:
    return scheme.labels[scheme.index_of_symbol(s)]


def xor_symbols(a: complex, b: complex, scheme: ModScheme) -> complex:
    i, j = scheme.index_of_symbol(a), scheme.index_of_symbol(b)
    return scheme.alphabet[scheme.xor_table[i, j]]


def bits_to_indices(bits, scheme: ModScheme) -> np.ndarray:
    """Group a bit stream (last axis) into words and return alphabet indices."""
    bits = np.asarray(bits, dtype=np.int64)
    k = scheme.bits_per_symbol
    if bits.shape[-1] % k:
        raise ValueError(
            f"packet of {bits.shape[-1]} bits is not a multiple of {k} ({scheme.name})"
        )
    if np.any((bits != 0) & (bits != 1)):
        raise ValueError("bits must be 0 or 1")
    words = bits.reshape(bits.shape[:-1] + (-1, k))
    # label -> index lookup via the integer value of the word
    lookup = np.empty(2**k, dtype=np.int64)
    for i, lab in enumerate(scheme.labels):
        lookup[int("".join(map(str, lab)), 2)] = i
    weights = 2 ** np.arange(k - 1, -1, -1)
    return lookup[words @ weights]


def indices_to_bits(indices, scheme: ModScheme) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64)
    bits = scheme.label_array[indices].astype(np.int64)
    return bits.reshape(indices.shape[:-1] + (-1,)) if indices.ndim else bits


def pack_bits(packet, scheme: ModScheme) -> np.ndarray:
    """Map a bit packet to its symbol sequence."""
    return scheme.points[bits_to_indices(packet, scheme)]


def unpack_symbols(symbols, scheme: ModScheme) -> np.ndarray:
    idx = np.array([scheme.index_of_symbol(s) for s in np.ravel(symbols)], dtype=np.int64)
    return indices_to_bits(idx, scheme)
