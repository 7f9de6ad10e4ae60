"""Single-state ANS variant with interval renormalization.

The state lives in ``I = [2**(T - v*n), 2**T)`` between steps.  Encoding a
symbol first grows the state by popping ``v*n``-bit chunks until it reaches
``I_s = [f(s) * 2**(T - v*n), 2**T)``, then emits the slot
``c(s) + x % f(s)`` and divides.  Decoding is the exact inverse.
"""
from __future__ import annotations

from bisect import bisect_right
from itertools import accumulate
from dataclasses import dataclass

import numpy as np

from .bitio import BitStack


class ZeroFrequency(ValueError):
    pass


@dataclass(frozen=True)
class CodecParams:
    B: int = 256
    T: int = 16
    n: int = 16
    v: int = 1

    def __post_init__(self) -> None:
        if self.B < 2:
            raise ValueError("alphabet needs at least two symbols")
        if self.n < 1 or self.v < 1 or self.T < 1:
            raise ValueError("T, n, v must be positive")
        if self.T - self.v * self.n < 0:
            raise ValueError(f"T - v*n must be >= 0 (T={self.T}, n={self.n}, v={self.v})")
        if self.T > 64:
            raise ValueError("state width above 64 bits is not supported")

    @property
    def chunk(self) -> int:
        return self.v * self.n

    @property
    def total(self) -> int:
        return 1 << self.n

    @property
    def lower(self) -> int:
        return 1 << (self.T - self.v * self.n)

    @property
    def upper(self) -> int:
        return 1 << self.T

    @property
    def start_state(self) -> int:
        # bottom of I; equals 1 for T == v*n
        return self.lower


class FrequencyTable:
    """Integer frequencies summing to a power of two, with cumulative counts."""

    __slots__ = ("freqs", "cum", "_f", "_c")

    def __init__(self, freqs) -> None:
        f = np.asarray(freqs, dtype=np.int64)
        if f.ndim != 1 or f.size == 0:
            raise ValueError("frequencies must be a non-empty vector")
        if (f < 0).any():
            raise ValueError("negative frequency")
        total = int(f.sum())
        if total <= 0 or total & (total - 1):
            raise ValueError(f"total frequency {total} is not a power of two")
        self.freqs = f
        self.cum = np.concatenate(([0], np.cumsum(f)))
        # python ints for the hot path
        self._f = f.tolist()
        self._c = self.cum.tolist()

    @classmethod
    def trusted(cls, f: np.ndarray) -> "FrequencyTable":
        """Skip validation; ``f`` must be int64 with a power-of-two sum."""
        self = cls.__new__(cls)
        self.freqs = f
        self._f = f.tolist()
        c = [0]
        c.extend(accumulate(self._f))
        self._c = c
        self.cum = np.asarray(c, dtype=np.int64)
        return self

    @classmethod
    def from_cumulative(cls, cum) -> "FrequencyTable":
        return cls(np.diff(np.asarray(cum, dtype=np.int64)))

    @property
    def B(self) -> int:
        return len(self._f)

    @property
    def total(self) -> int:
        return self._c[-1]

    @property
    def n(self) -> int:
        return self.total.bit_length() - 1

    def f(self, s: int) -> int:
        return self._f[s]

    def c(self, s: int) -> int:
        return self._c[s]

    def symbol(self, slot: int) -> int:
        """Inverse cumulative lookup: the s with c(s) <= slot < c(s+1)."""
        if not 0 <= slot < self._c[-1]:
            raise ValueError(f"slot {slot} out of range")
        return bisect_right(self._c, slot) - 1

    def pmf(self) -> np.ndarray:
        return self.freqs / float(self.total)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FrequencyTable):
            return NotImplemented
        return self._f == other._f

    def __repr__(self) -> str:
        return f"FrequencyTable(B={self.B}, total={self.total})"


def encode_step(x: int, s: int, tbl: FrequencyTable, io: BitStack, params: CodecParams) -> tuple[int, int]:
    """Encode symbol ``s`` into state ``x``; returns (slot, new state).

    States below ``I_s`` are grown by popping ``v*n`` bits from ``io``.
    """
    fs = tbl._f[s]
    if fs == 0:
        raise ZeroFrequency(f"symbol {s} has zero frequency")
    if x < 1:
        raise ValueError("state must be positive")
    chunk = params.chunk
    bound = fs << (params.T - chunk)
    while x < bound:
        x = (x << chunk) | io.read(chunk)
    q, r = divmod(x, fs)
    return tbl._c[s] + r, q


def decode_step(x: int, slot: int, tbl: FrequencyTable, io: BitStack, params: CodecParams) -> tuple[int, int]:
    """Decode the symbol addressed by ``slot`` and fold it back into ``x``.

    Pushes ``v*n``-bit chunks to ``io`` while the state is at or above ``2**T``.
    """
    s = tbl.symbol(slot)
    x = tbl._f[s] * x + slot - tbl._c[s]
    chunk = params.chunk
    upper = params.upper
    mask = (1 << chunk) - 1
    while x >= upper:
        io.write(x & mask, chunk)
        x >>= chunk
    return s, x
