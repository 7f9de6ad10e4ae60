"""LIFO bit stack used both as the hidden message and as the coder's I/O channel.

Bits are stored bottom-to-top in a bytearray (one bit per byte).  ``write``
pushes the low ``i`` bits of an integer with its most significant bit ending
up on top, so that ``read`` pops the top bit first and reassembles the same
integer.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable


class StackUnderflow(Exception):
    """Raised when more bits are read than the stack holds and padding is off."""


class BitStack:
    __slots__ = ("_bits", "allow_padding", "pad_count", "low_water")

    def __init__(self, bits: Iterable[int] = (), allow_padding: bool = False) -> None:
        self._bits = bytearray(bits)
        if any(b > 1 for b in self._bits):
            raise ValueError("bits must be 0 or 1")
        self.allow_padding = allow_padding
        self.pad_count = 0
        # smallest length reached since construction; everything below it is
        # untouched caller data
        self.low_water = len(self._bits)

    def __len__(self) -> int:
        return len(self._bits)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitStack):
            return NotImplemented
        return self._bits == other._bits

    def __repr__(self) -> str:
        top = "".join(map(str, reversed(self._bits[-32:])))
        more = "..." if len(self._bits) > 32 else ""
        return f"BitStack(len={len(self)}, top={top}{more})"

    def copy(self) -> "BitStack":
        out = BitStack(allow_padding=self.allow_padding)
        out._bits = bytearray(self._bits)
        out.low_water = len(out._bits)
        return out

    def write(self, q: int, i: int) -> None:
        """Push the least significant ``i`` bits of ``q``."""
        if i < 1:
            raise ValueError("bit width must be >= 1")
        self._bits.extend((q >> k) & 1 for k in range(i))

    def read(self, i: int) -> int:
        """Pop ``i`` bits from the top and return them as an integer (top bit = MSB)."""
        if i < 1:
            raise ValueError("bit width must be >= 1")
        bits = self._bits
        have = len(bits)
        if have < i:
            if not self.allow_padding:
                raise StackUnderflow(f"need {i} bits, stack holds {have}")
            # zeros are conceptually stacked below the bottom
            missing = i - have
            q = 0
            for b in reversed(bits):
                q = (q << 1) | b
            q <<= missing
            bits.clear()
            self.pad_count += missing
            self.low_water = 0
            return q
        q = 0
        for k in range(have - 1, have - 1 - i, -1):
            q = (q << 1) | bits[k]
        del bits[have - i:]
        if have - i < self.low_water:
            self.low_water = have - i
        return q

    def top_bits(self) -> list[int]:
        """Bits in pop order (top first)."""
        return list(reversed(self._bits))

    def bottom_bits(self) -> list[int]:
        return list(self._bits)

    def split_at_low_water(self) -> tuple["BitStack", "BitStack"]:
        """Return (untouched bottom part, bits pushed above it)."""
        lw = self.low_water
        return BitStack(self._bits[:lw]), BitStack(self._bits[lw:])

    # serialization: u64 bit count, then bytes with the top of the stack as
    # the MSB of the first byte; the final partial byte is zero-padded low.
    def to_bytes(self) -> bytes:
        return struct.pack("<Q", len(self._bits)) + pack_bits(self.top_bits())

    @classmethod
    def from_bytes(cls, data: bytes, allow_padding: bool = False) -> "BitStack":
        if len(data) < 8:
            raise ValueError("truncated bit stack header")
        (nbits,) = struct.unpack_from("<Q", data)
        body = data[8:]
        if len(body) != (nbits + 7) // 8:
            raise ValueError("bit stack length does not match header")
        top_first = unpack_bits(body, nbits)
        return cls(reversed(top_first), allow_padding=allow_padding)


def pack_bits(bits: list[int]) -> bytes:
    """Pack a bit list MSB-first into bytes, zero-padding the last byte."""
    out = bytearray((len(bits) + 7) // 8)
    for k, b in enumerate(bits):
        if b:
            out[k >> 3] |= 0x80 >> (k & 7)
    return bytes(out)


def unpack_bits(data: bytes, nbits: int | None = None) -> list[int]:
    if nbits is None:
        nbits = 8 * len(data)
    if nbits > 8 * len(data):
        raise ValueError("not enough bytes for requested bit count")
    return [(data[k >> 3] >> (7 - (k & 7))) & 1 for k in range(nbits)]


@dataclass
class MessageContainer:
    """A message as a padded bit stack plus the bookkeeping needed to trim it.

    The first bit of the message sits on top of the stack, so it is the first
    bit the embedder consumes.
    """

    payload: BitStack
    original_len: int
    pad_count: int = field(default=0)

    @classmethod
    def from_bits(cls, bits: Iterable[int]) -> "MessageContainer":
        bits = list(bits)
        return cls(BitStack(reversed(bits), allow_padding=True), len(bits))

    @classmethod
    def from_bytes(cls, data: bytes, nbits: int | None = None) -> "MessageContainer":
        return cls.from_bits(unpack_bits(data, nbits))

    def bits(self) -> list[int]:
        """Message bits in original order, trimmed to ``original_len``."""
        return self.payload.top_bits()[: self.original_len]

    def to_bytes(self) -> bytes:
        return pack_bits(self.bits())

    def __len__(self) -> int:
        return len(self.payload)
