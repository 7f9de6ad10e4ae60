"""Gray-scale image pipeline: predictor, lookup table, image codecs, PGM I/O, metrics.

Pixels are scanned in raster order.  Every predictor neighbour of a pixel comes
later in that order, so a reverse scan always has them decoded already:

    a1 = (r, c+1)      right
    a2 = (r+1, c)      below
    a3 = (r+1, c-1)    below-left
    a4 = (r+1, c+1)    below-right

Pixels without all four neighbours fall back to one of them; see
:func:`predict`.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from .ans import CodecParams
from .bfi import BfiConfig, cumulative, default_relax
from .bitio import MessageContainer
from .rdh import (
    DEFAULT_REFRESH,
    AdaptiveModel,
    Desync,
    StaticTables,
    StegoPayload,
    _payload,
    dynamic_embed_loop,
    dynamic_extract_loop,
    static_embed_loop,
    static_extract_loop,
)

B = 256
CORNER_DEFAULT = 128
DIAGONAL_INIT = 32

TableInit = Literal["static", "dynamic"]


class DimensionMismatch(ValueError):
    pass


@dataclass
class GrayImage:
    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = np.asarray(self.pixels)
        if px.ndim != 2 or px.size == 0:
            raise ValueError("image must be a non-empty 2-D array")
        if px.dtype != np.uint8:
            if px.min() < 0 or px.max() > 255:
                raise ValueError("pixels must lie in [0, 255]")
            px = px.astype(np.uint8)
        self.pixels = px

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool((self.pixels == other.pixels).all())


def _pixels(img) -> np.ndarray:
    return img.pixels if isinstance(img, GrayImage) else GrayImage(np.asarray(img)).pixels


def _predict_flat(buf, i: int, h: int, w: int) -> int:
    # buf is the raster-order pixel sequence; precedence: corner, bottom row,
    # rightmost column, leftmost column
    r, c = divmod(i, w)
    last_r = r == h - 1
    last_c = c == w - 1
    if last_r and last_c:
        return CORNER_DEFAULT
    if last_r or (c == 0 and not last_c):
        return int(buf[i + 1])
    j = i + w
    if last_c:
        return int(buf[j])
    return (3 * int(buf[i + 1]) + 3 * int(buf[j]) + int(buf[j - 1]) + int(buf[j + 1]) + 4) >> 3


def predict(img, row: int, col: int) -> int:
    """Predicted value of pixel (row, col) from its right and lower neighbours.

    Interior pixels use ``(3*a1 + 3*a2 + a3 + a4 + 4) // 8``.  On the bottom
    row the right neighbour is used, in the rightmost column the pixel below,
    in the leftmost column the right neighbour, and the bottom-right corner
    is fixed at 128.
    """
    px = _pixels(img)
    h, w = px.shape
    if not (0 <= row < h and 0 <= col < w):
        raise IndexError(f"pixel ({row}, {col}) outside {h}x{w} image")
    return _predict_flat(px.ravel(), row * w + col, h, w)


def predict_all(img) -> np.ndarray:
    """Vectorized :func:`predict` over the whole image."""
    px = _pixels(img).astype(np.int64)
    h, w = px.shape
    out = np.empty((h, w), dtype=np.int64)
    if h > 1 and w > 2:
        out[:-1, 1:-1] = (3 * px[:-1, 2:] + 3 * px[1:, 1:-1] + px[1:, :-2] + px[1:, 2:] + 4) >> 3
    if h > 1:
        out[:-1, -1] = px[1:, -1]
        if w > 1:
            out[:-1, 0] = px[:-1, 1]
    if w > 1:
        out[-1, :-1] = px[-1, 1:]
    out[-1, -1] = CORNER_DEFAULT
    return out


def initial_table(init: TableInit) -> np.ndarray:
    K = np.ones((B, B), dtype=np.int64)
    if init == "dynamic":
        np.fill_diagonal(K, DIAGONAL_INIT)
    elif init != "static":
        raise ValueError(f"unknown table init {init!r}")
    return K


def build_lookup_table(img, init: TableInit = "static") -> np.ndarray:
    """``K[i, j]`` = floor + number of pixels equal to ``j`` predicted as ``i``."""
    px = _pixels(img)
    K = initial_table(init)
    np.add.at(K, (predict_all(px).ravel(), px.ravel().astype(np.int64)), 1)
    return K


def _row_source(K: np.ndarray):
    return lambda ctx: cumulative(K[ctx])


def _reverse_ctx(shape: tuple[int, int]):
    h, w = shape
    return lambda i, out: _predict_flat(out, i, h, w)


def embed_image(img, msg: MessageContainer, mode: Literal["static", "dynamic"] = "static",
                cfg: BfiConfig = BfiConfig(1.01), params: CodecParams = CodecParams(),
                refresh: int = DEFAULT_REFRESH, relax: float | None = None) -> tuple[GrayImage, StegoPayload]:
    px = _pixels(img)
    relax = default_relax(cfg.alpha) if relax is None else relax
    if params.B != B:
        raise ValueError("image codecs need a 256-symbol alphabet")
    seq = px.ravel().astype(np.int64).tolist()
    ctxs = predict_all(px).ravel().tolist()
    if mode == "static":
        K = build_lookup_table(px, "static")
        out, x, w = static_embed_loop(seq, ctxs, StaticTables(cfg, params, _row_source(K), relax), msg, params)
        payload = _payload(out, x, w, msg, params, "static", cfg, 0, relax)
        payload.lut = K
    elif mode == "dynamic":
        model = AdaptiveModel(initial_table("dynamic"))
        out, x, w = dynamic_embed_loop(seq, ctxs, model, msg, params, cfg, refresh, relax)
        payload = _payload(out, x, w, msg, params, "dynamic", cfg, refresh, relax)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    stego = np.asarray(out, dtype=np.uint8).reshape(px.shape)
    payload.stego = stego.ravel().astype(np.int64)
    return GrayImage(stego), payload


def extract_image(stego, payload: StegoPayload, final_table: list | None = None) -> tuple[GrayImage, MessageContainer]:
    """Invert :func:`embed_image`.  With ``final_table`` given (a list), the
    dynamic model's final counts are appended to it."""
    px = _pixels(stego)
    seq = px.ravel().astype(np.int64).tolist()
    ctx_of = _reverse_ctx(px.shape)
    if payload.mode == "static":
        if payload.lut is None:
            raise Desync("static image extraction needs the lookup table")
        tables = StaticTables(payload.cfg, payload.params, _row_source(np.asarray(payload.lut)), payload.relax)
        out, msg = static_extract_loop(seq, ctx_of, tables, payload)
    else:
        model = AdaptiveModel(initial_table("dynamic"))
        out, msg = dynamic_extract_loop(seq, ctx_of, model, payload)
        if final_table is not None:
            final_table.append(model.counts)
    return GrayImage(np.asarray(out, dtype=np.uint8).reshape(px.shape)), msg


def mse(a, b) -> float:
    pa = _pixels(a).astype(np.float64)
    pb = _pixels(b).astype(np.float64)
    if pa.shape != pb.shape:
        raise DimensionMismatch(f"{pa.shape} vs {pb.shape}")
    return float(((pa - pb) ** 2).mean())


def psnr(a, b) -> float:
    """Peak signal-to-noise ratio in dB; identical images give ``inf``."""
    m = mse(a, b)
    if m == 0:
        return math.inf
    return 10.0 * math.log10(255.0**2 / m)


# PGM (binary P5, maxval 255)

_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n?)*([^\s#]+)")


def parse_pgm(data: bytes) -> GrayImage:
    pos = 0
    fields = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise ValueError("truncated PGM header")
        fields.append(m.group(1))
        pos = m.end()
    if fields[0] != b"P5":
        raise ValueError(f"not a binary PGM (magic {fields[0]!r})")
    try:
        w, h, maxval = (int(f) for f in fields[1:])
    except ValueError as exc:
        raise ValueError("malformed PGM header") from exc
    if maxval != 255:
        raise ValueError(f"only maxval 255 is supported, got {maxval}")
    if w <= 0 or h <= 0:
        raise ValueError("PGM dimensions must be positive")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise ValueError("missing whitespace after PGM header")
    body = data[pos + 1 :]
    if len(body) < w * h:
        raise ValueError(f"PGM body has {len(body)} bytes, expected {w * h}")
    return GrayImage(np.frombuffer(body, dtype=np.uint8, count=w * h).reshape(h, w).copy())


def format_pgm(img) -> bytes:
    px = _pixels(img)
    h, w = px.shape
    return b"P5\n%d %d\n255\n" % (w, h) + px.tobytes()


def read_pgm(path) -> GrayImage:
    return parse_pgm(Path(path).read_bytes())


def write_pgm(path, img) -> None:
    Path(path).write_bytes(format_pgm(img))
