"""Static and dynamic reversible embedding on symbol sequences.

One embedding step encodes the host symbol with the host table (popping
message bits when the state is too small) and decodes the resulting slot with
the stego table (pushing bits when the state overflows).  Extraction runs the
mirror pair in reverse order.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np

from .ans import CodecParams, FrequencyTable, ZeroFrequency, decode_step, encode_step
from .bfi import (
    BfiConfig,
    InfeasibleTable,
    bfi_estimate,
    bfi_solve,
    count_frequencies,
    cumulative,
    default_relax,
    quantize,
)
from .bitio import BitStack, MessageContainer, StackUnderflow

Mode = Literal["static", "dynamic"]

DEFAULT_REFRESH = 64


class Desync(Exception):
    """Extraction left the legal state space: corrupted payload or wrong parameters."""

    def __init__(self, msg: str, position: int | None = None) -> None:
        super().__init__(msg if position is None else f"{msg} (at symbol {position})")
        self.position = position


@dataclass
class StegoPayload:
    stego: np.ndarray
    final_state: int
    params: CodecParams
    mode: Mode
    cfg: BfiConfig
    original_len: int
    pad_count: int
    # bits the embedder pushed above the untouched part of the message;
    # extraction starts from these
    residual: BitStack
    embedded_bits: int
    message_bits: int
    refresh: int = DEFAULT_REFRESH
    # over-relaxation factor the BFI solves used
    relax: float = 1.0
    # static image mode: the lookup table the extractor needs
    lut: np.ndarray | None = field(default=None, repr=False)
    leftover: BitStack | None = field(default=None, repr=False)

    @property
    def rate(self) -> float:
        return self.embedded_bits / max(len(self.stego), 1)


def embed_symbol(x: int, s: int, host: FrequencyTable, stego: FrequencyTable, w: BitStack, params: CodecParams) -> tuple[int, int]:
    slot, x = encode_step(x, s, host, w, params)
    return decode_step(x, slot, stego, w, params)


def extract_symbol(x: int, y: int, host: FrequencyTable, stego: FrequencyTable, w: BitStack, params: CodecParams) -> tuple[int, int]:
    slot, x = encode_step(x, y, stego, w, params)
    return decode_step(x, slot, host, w, params)


def static_tables(pcx, cfg: BfiConfig, params: CodecParams, relax: float = 1.0) -> tuple[FrequencyTable, FrequencyTable]:
    pcx = np.asarray(pcx, dtype=np.float64)
    if pcx.size != params.B + 1:
        raise ValueError(f"cumulative pmf has {pcx.size - 1} symbols, expected {params.B}")
    host = quantize(pcx, params.n)
    stego = quantize(bfi_estimate(pcx, cfg, relax), params.n)
    return host, stego


def count_table(counts, params: CodecParams) -> FrequencyTable:
    return count_frequencies(counts, params.n)


class StegoSchedule:
    """Stego tables for adaptive counts, one chain per context.

    Each context's table is recomputed on every ``refresh``-th use in decoder
    order, warm-starting BFI from that context's previous solution (with an
    over-relaxed phase when ``relax > 1``).  The
    embedder replays the same chain in a decoder-order pre-pass, so both sides
    see bit-identical tables.
    """

    def __init__(self, cfg: BfiConfig, params: CodecParams, refresh: int, relax: float = 1.0) -> None:
        if refresh < 1:
            raise ValueError("refresh interval must be >= 1")
        self.cfg = cfg
        self.relax = relax
        self.params = params
        self.refresh = refresh
        self._solution: dict[int, np.ndarray] = {}
        self._table: dict[int, FrequencyTable] = {}
        self.solves = 0

    def table(self, ctx: int, counts: np.ndarray, uses: int) -> FrequencyTable:
        """Stego table for the ``uses``-th visit (0-based) of ``ctx``."""
        if uses % self.refresh == 0 or ctx not in self._table:
            res = bfi_solve(cumulative(counts), self.cfg, init=self._solution.get(ctx), relax=self.relax)
            self._solution[ctx] = res.values
            self._table[ctx] = quantize(res.values, self.params.n)
            self.solves += 1
        return self._table[ctx]


def _check_symbols(seq: np.ndarray, B: int) -> np.ndarray:
    seq = np.asarray(seq)
    if seq.ndim != 1:
        raise ValueError("host must be a 1-D symbol sequence")
    if seq.size and (seq.min() < 0 or seq.max() >= B):
        raise ValueError(f"symbols must lie in [0, {B})")
    return seq.astype(np.int64)


def _payload(stego, x, w: BitStack, msg: MessageContainer, params, mode, cfg, refresh, relax=1.0) -> StegoPayload:
    start_len = len(msg.payload)
    bottom, residual = w.split_at_low_water()
    recoverable = start_len + w.pad_count - w.low_water
    return StegoPayload(
        stego=np.asarray(stego, dtype=np.int64),
        final_state=x,
        params=params,
        mode=mode,
        cfg=cfg,
        original_len=msg.original_len,
        pad_count=w.pad_count,
        residual=residual,
        embedded_bits=start_len + w.pad_count - len(w),
        message_bits=min(msg.original_len, recoverable),
        refresh=refresh,
        relax=relax,
        leftover=bottom,
    )


def _finish_extract(x: int, w: BitStack, payload: StegoPayload) -> MessageContainer:
    if x != payload.params.start_state:
        raise Desync(f"final state {x} != start state {payload.params.start_state}")
    return MessageContainer(w, min(payload.original_len, len(w)), payload.pad_count)


class StaticTables:
    """Per-context (host, stego) table pairs derived once from fixed counts or pmfs."""

    def __init__(self, cfg: BfiConfig, params: CodecParams, source, relax: float = 1.0) -> None:
        self.cfg = cfg
        self.params = params
        self.relax = relax
        self._source = source
        self._cache: dict[int, tuple[FrequencyTable, FrequencyTable]] = {}

    def __call__(self, ctx: int) -> tuple[FrequencyTable, FrequencyTable]:
        pair = self._cache.get(ctx)
        if pair is None:
            pair = static_tables(self._source(ctx), self.cfg, self.params, self.relax)
            self._cache[ctx] = pair
        return pair


def static_embed_loop(seq: list[int], ctxs, tables: StaticTables, msg: MessageContainer, params: CodecParams):
    w = msg.payload.copy()
    w.allow_padding = True
    x = params.start_state
    out = []
    for i, s in enumerate(seq):
        host_tbl, stego_tbl = tables(ctxs[i])
        if host_tbl.f(s) == 0:
            raise InfeasibleTable(f"host symbol {s} has zero quantized frequency")
        y, x = embed_symbol(x, s, host_tbl, stego_tbl, w, params)
        out.append(y)
    return out, x, w


def static_extract_loop(stego: list[int], ctx_of, tables: StaticTables, payload: StegoPayload):
    """Reverse scan; ``ctx_of(i, out)`` may look at already decoded positions > i."""
    params = payload.params
    w = payload.residual.copy()
    w.allow_padding = False
    x = payload.final_state
    out = [0] * len(stego)
    for i in range(len(stego) - 1, -1, -1):
        try:
            host_tbl, stego_tbl = tables(ctx_of(i, out))
            out[i], x = extract_symbol(x, stego[i], host_tbl, stego_tbl, w, params)
        except (ZeroFrequency, StackUnderflow, InfeasibleTable, ValueError) as exc:
            raise Desync(str(exc), i) from exc
    return out, _finish_extract(x, w, payload)


def embed_static(host, pcx, cfg: BfiConfig, msg: MessageContainer, params: CodecParams = CodecParams(),
                 relax: float | None = None) -> StegoPayload:
    """``relax`` defaults to :func:`default_relax` of the config's alpha."""
    host = _check_symbols(host, params.B)
    relax = default_relax(cfg.alpha) if relax is None else relax
    tables = StaticTables(cfg, params, lambda ctx: pcx, relax)
    out, x, w = static_embed_loop(host.tolist(), _ZeroCtx(), tables, msg, params)
    return _payload(out, x, w, msg, params, "static", cfg, 0, relax)


def extract_static(payload: StegoPayload, pcx, cfg: BfiConfig | None = None) -> tuple[np.ndarray, MessageContainer]:
    params = payload.params
    tables = StaticTables(cfg or payload.cfg, params, lambda ctx: pcx, payload.relax)
    stego = _check_symbols(payload.stego, params.B).tolist()
    out, msg = static_extract_loop(stego, lambda i, out: 0, tables, payload)
    return np.asarray(out, dtype=np.int64), msg


class _ZeroCtx:
    def __getitem__(self, i: int) -> int:
        return 0


class AdaptiveModel:
    """Per-context occurrence counts; a count never drops below its initial floor of 1."""

    def __init__(self, init: np.ndarray) -> None:
        self.counts = np.array(init, dtype=np.int64)
        if self.counts.ndim != 2 or (self.counts < 1).any():
            raise ValueError("initial counts must be a 2-D array of positive integers")

    def add(self, ctx: int, s: int) -> None:
        self.counts[ctx, s] += 1

    def remove(self, ctx: int, s: int) -> None:
        if self.counts[ctx, s] <= 1:
            raise ValueError(f"count for symbol {s} would drop below the floor")
        self.counts[ctx, s] -= 1


def dynamic_embed_loop(seq: list[int], ctxs: list[int], model: AdaptiveModel, msg: MessageContainer, params: CodecParams,
                       cfg: BfiConfig, refresh: int, relax: float, trace: list | None = None):
    """Both passes of adaptive embedding.  ``model`` holds the initial counts
    on entry and is returned to that state on exit."""
    n_total = len(seq)
    schedule = StegoSchedule(cfg, params, refresh, relax)
    # pass 1, decoder order: learn the counts and replay the stego-table chain
    stego_at: list[FrequencyTable | None] = [None] * n_total
    uses: dict[int, int] = {}
    for i in range(n_total - 1, -1, -1):
        ctx = ctxs[i]
        if not cfg.identity:
            u = uses.get(ctx, 0)
            stego_at[i] = schedule.table(ctx, model.counts[ctx], u)
            uses[ctx] = u + 1
        model.add(ctx, seq[i])
    w = msg.payload.copy()
    w.allow_padding = True
    x = params.start_state
    out = []
    for i, s in enumerate(seq):
        ctx = ctxs[i]
        model.remove(ctx, s)
        host_tbl = count_table(model.counts[ctx], params)
        stego_tbl = host_tbl if cfg.identity else stego_at[i]
        if trace is not None:
            trace.append((host_tbl, stego_tbl))
        y, x = embed_symbol(x, s, host_tbl, stego_tbl, w, params)
        out.append(y)
    return out, x, w


def dynamic_extract_loop(stego: list[int], ctx_of, model: AdaptiveModel, payload: StegoPayload,
                         trace: list | None = None):
    params = payload.params
    cfg = payload.cfg
    schedule = StegoSchedule(cfg, params, payload.refresh, payload.relax)
    uses: dict[int, int] = {}
    w = payload.residual.copy()
    w.allow_padding = False
    x = payload.final_state
    out = [0] * len(stego)
    for i in range(len(stego) - 1, -1, -1):
        try:
            ctx = ctx_of(i, out)
            host_tbl = count_table(model.counts[ctx], params)
            if cfg.identity:
                stego_tbl = host_tbl
            else:
                u = uses.get(ctx, 0)
                stego_tbl = schedule.table(ctx, model.counts[ctx], u)
                uses[ctx] = u + 1
            if trace is not None:
                trace.append((host_tbl, stego_tbl))
            s, x = extract_symbol(x, stego[i], host_tbl, stego_tbl, w, params)
        except (ZeroFrequency, StackUnderflow, InfeasibleTable, ValueError) as exc:
            raise Desync(str(exc), i) from exc
        out[i] = s
        model.add(ctx, s)
    return out, _finish_extract(x, w, payload)


def embed_dynamic(host, msg: MessageContainer, params: CodecParams = CodecParams(), cfg: BfiConfig = BfiConfig(1.001),
                  refresh: int = DEFAULT_REFRESH, relax: float | None = None,
                  trace: list | None = None) -> StegoPayload:
    host = _check_symbols(host, params.B)
    relax = default_relax(cfg.alpha) if relax is None else relax
    model = AdaptiveModel(np.ones((1, params.B), dtype=np.int64))
    out, x, w = dynamic_embed_loop(host.tolist(), _ZeroCtx(), model, msg, params, cfg, refresh, relax, trace)
    return _payload(out, x, w, msg, params, "dynamic", cfg, refresh, relax)


def extract_dynamic(payload: StegoPayload, params: CodecParams | None = None, cfg: BfiConfig | None = None,
                    trace: list | None = None) -> tuple[np.ndarray, MessageContainer]:
    """Invert :func:`embed_dynamic`.  ``trace`` (if given) collects
    ``(host table, stego table)`` pairs in decoder order."""
    if params is not None or cfg is not None:
        payload = replace(payload, params=params or payload.params, cfg=cfg or payload.cfg)
    stego = _check_symbols(payload.stego, payload.params.B).tolist()
    model = AdaptiveModel(np.ones((1, payload.params.B), dtype=np.int64))
    out, msg = dynamic_extract_loop(stego, lambda i, out: 0, model, payload, trace)
    return np.asarray(out, dtype=np.int64), msg
