"""Binary sidecar: everything extraction needs besides the stego media.

Layout (little-endian)::

    magic "ARDH" | u16 version | header struct | residual bit stack
    | optional f64[B+1] host cumulative pmf | optional varint B*B table
    | u32 CRC-32 of everything before it

Floats are stored as their IEEE-754 bit patterns so embed and extract see
exactly the same alpha, epsilon and relaxation factor.
"""
from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .ans import CodecParams
from .bfi import BfiConfig
from .bitio import BitStack
from .rdh import StegoPayload

MAGIC = b"ARDH"
VERSION = 1

_HEAD = struct.Struct("<4sH")
# mode, kind, flags, T, n, v, B, alpha, epsilon, max_sweeps, refresh, relax,
# final_state, height, width, pad_count, original_len, message_bits, embedded_bits
_BODY = struct.Struct("<BBBBBBIdd QIdQ II QQQq")

_HAS_PCX = 1
_HAS_LUT = 2

MODES = ("static", "dynamic")
KINDS = ("raw", "image")


class SidecarError(ValueError):
    pass


def _put_varint(out: bytearray, v: int) -> None:
    while True:
        b = v & 0x7F
        v >>= 7
        if v:
            out.append(b | 0x80)
        else:
            out.append(b)
            return


def _get_varint(data: bytes, pos: int) -> tuple[int, int]:
    v = shift = 0
    while True:
        if pos >= len(data):
            raise SidecarError("truncated varint")
        b = data[pos]
        pos += 1
        v |= (b & 0x7F) << shift
        if not b & 0x80:
            return v, pos
        shift += 7
        if shift > 63:
            raise SidecarError("varint too long")


@dataclass
class Sidecar:
    payload: StegoPayload
    kind: str = "raw"
    shape: tuple[int, int] = (1, 0)
    pcx: np.ndarray | None = None

    def to_bytes(self) -> bytes:
        p = self.payload
        flags = (_HAS_PCX if self.pcx is not None else 0) | (_HAS_LUT if p.lut is not None else 0)
        out = bytearray(_HEAD.pack(MAGIC, VERSION))
        out += _BODY.pack(
            MODES.index(p.mode), KINDS.index(self.kind), flags,
            p.params.T, p.params.n, p.params.v, p.params.B,
            p.cfg.alpha, p.cfg.epsilon, p.cfg.max_sweeps, p.refresh, p.relax,
            p.final_state, self.shape[0], self.shape[1],
            p.pad_count, p.original_len, p.message_bits, p.embedded_bits,
        )
        res = p.residual.to_bytes()
        out += struct.pack("<Q", len(res)) + res
        if self.pcx is not None:
            out += np.asarray(self.pcx, dtype="<f8").tobytes()
        if p.lut is not None:
            for v in np.asarray(p.lut).ravel().tolist():
                _put_varint(out, v)
        out += struct.pack("<I", zlib.crc32(out))
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes, stego=None) -> "Sidecar":
        """Parse a sidecar.  ``stego`` (the symbol sequence) is attached to the payload."""
        if len(data) < _HEAD.size + _BODY.size + 4:
            raise SidecarError("sidecar is truncated")
        magic, version = _HEAD.unpack_from(data)
        if magic != MAGIC:
            raise SidecarError(f"bad magic {magic!r}")
        if version != VERSION:
            raise SidecarError(f"unsupported sidecar version {version}")
        (crc,) = struct.unpack_from("<I", data, len(data) - 4)
        if zlib.crc32(data[:-4]) != crc:
            raise SidecarError("checksum mismatch")
        (mode, kind, flags, T, n, v, B, alpha, eps, max_sweeps, refresh, relax,
         final_state, height, width, pad_count, original_len, message_bits,
         embedded_bits) = _BODY.unpack_from(data, _HEAD.size)
        try:
            params = CodecParams(B=B, T=T, n=n, v=v)
            cfg = BfiConfig(alpha, eps, max_sweeps)
            mode_s, kind_s = MODES[mode], KINDS[kind]
        except (ValueError, IndexError) as exc:
            raise SidecarError(f"invalid header field: {exc}") from exc
        pos = _HEAD.size + _BODY.size
        end = len(data) - 4
        if pos + 8 > end:
            raise SidecarError("truncated residual section")
        (rlen,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        if pos + rlen > end:
            raise SidecarError("truncated residual section")
        try:
            residual = BitStack.from_bytes(data[pos : pos + rlen])
        except ValueError as exc:
            raise SidecarError(str(exc)) from exc
        pos += rlen
        pcx = None
        if flags & _HAS_PCX:
            size = 8 * (B + 1)
            if pos + size > end:
                raise SidecarError("truncated distribution section")
            pcx = np.frombuffer(data, dtype="<f8", count=B + 1, offset=pos).astype(np.float64)
            pos += size
        lut = None
        if flags & _HAS_LUT:
            vals = []
            for _ in range(B * B):
                val, pos = _get_varint(data, pos)
                vals.append(val)
            if pos > end:
                raise SidecarError("truncated table section")
            lut = np.asarray(vals, dtype=np.int64).reshape(B, B)
        if pos != end:
            raise SidecarError(f"{end - pos} unexpected trailing bytes")
        payload = StegoPayload(
            stego=np.asarray([] if stego is None else stego, dtype=np.int64),
            final_state=final_state,
            params=params,
            mode=mode_s,
            cfg=cfg,
            original_len=original_len,
            pad_count=pad_count,
            residual=residual,
            embedded_bits=embedded_bits,
            message_bits=message_bits,
            refresh=refresh,
            relax=relax,
            lut=lut,
        )
        return cls(payload, kind_s, (height, width), pcx)

    @property
    def distribution_bytes(self) -> int:
        """Bytes spent on explicit distributions (host pmf or lookup table)."""
        n = 0
        if self.pcx is not None:
            n += 8 * self.pcx.size
        if self.payload.lut is not None:
            buf = bytearray()
            for v in np.asarray(self.payload.lut).ravel().tolist():
                _put_varint(buf, v)
            n += len(buf)
        return n
