"""Backward-and-forward iterative (BFI) estimation of the stego distribution.

Cumulative pmfs are stored as float vectors of length ``B + 1`` whose first
entry is the ``-1`` sentinel: ``e[0] == 0``, ``e[y + 1]`` is the cumulative
probability up to symbol ``y`` and ``e[B] == 1``.  Integer tables use the same
layout (see :class:`ansrdh.ans.FrequencyTable`).

Distortion is squared error throughout.  With that metric the exponent
``D(s, y) - D(s, y + 1)`` reduces to ``2 * (s - y) - 1``.
"""
from __future__ import annotations

import math
import warnings
from collections import OrderedDict
from dataclasses import dataclass

import numba
import numpy as np

from .ans import FrequencyTable


class NonConvergence(RuntimeWarning):
    pass


class InfeasibleTable(ValueError):
    pass


@dataclass(frozen=True)
class BfiConfig:
    alpha: float
    epsilon: float = 1e-9
    max_sweeps: int = 1_000_000

    def __post_init__(self) -> None:
        if math.isnan(self.alpha) or self.alpha < 1.0:
            raise ValueError(f"alpha must be >= 1, got {self.alpha}")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_sweeps < 2:
            raise ValueError("max_sweeps must allow one forward and one backward pass")

    @property
    def identity(self) -> bool:
        return math.isinf(self.alpha)

    @property
    def uniform(self) -> bool:
        return self.alpha == 1.0


@dataclass
class BfiResult:
    values: np.ndarray
    sweeps: int
    converged: bool
    last_offset: float


def cumulative(pmf) -> np.ndarray:
    """pmf (length B) -> cumulative vector (length B + 1) with exact endpoints."""
    p = np.asarray(pmf, dtype=np.float64)
    if p.ndim != 1 or (p < 0).any():
        raise ValueError("pmf must be a non-negative vector")
    total = p.sum()
    if not total > 0:
        raise ValueError("pmf has no mass")
    c = np.empty(p.size + 1)
    c[0] = 0.0
    np.cumsum(p / total, out=c[1:])
    # rounding can push the tail a ulp past 1
    np.minimum(c, 1.0, out=c)
    c[-1] = 1.0
    return c


def pmf_of(cum) -> np.ndarray:
    return np.diff(np.asarray(cum, dtype=np.float64))


def _check_cumulative(c: np.ndarray) -> None:
    if c.ndim != 1 or c.size < 3:
        raise ValueError("cumulative pmf needs at least two symbols")
    if c[0] != 0.0 or c[-1] != 1.0:
        raise ValueError("cumulative pmf must start at 0 and end at 1")
    if (np.diff(c) < 0).any():
        raise ValueError("cumulative pmf must be non-decreasing")


@numba.njit(cache=True)
def _update(e, y, pcx, ratio, off):
    lo = e[y]
    hi = e[y + 2]
    if hi <= lo:
        return lo
    B = pcx.shape[0] - 1
    # host segment s is [pcx[s], pcx[s+1]); start at the one holding lo
    s = np.searchsorted(pcx, lo, side="right") - 1
    if s > B - 1:
        s = B - 1
    while True:
        a = pcx[s]
        b = pcx[s + 1]
        if b > a:
            cand = lo + (hi - lo) / (1.0 + ratio[2 * (s - y) - 1 + off])
            if cand < b or b >= hi or s == B - 1:
                if cand > a:
                    return cand
                return a
        s += 1


@numba.njit(cache=True)
def _sweep(e, pcx, ratio, off, forward):
    B = pcx.shape[0] - 1
    var = 0.0
    for k in range(B - 1):
        y = k if forward else B - 2 - k
        new = _update(e, y, pcx, ratio, off)
        d = abs(new - e[y + 1])
        if d > var:
            var = d
        e[y + 1] = new
    return var


@numba.njit(cache=True)
def _relaxed_sweep(e, pcx, ratio, off, forward, omega):
    # over-relaxed pass; moves are clipped so e stays non-decreasing
    B = pcx.shape[0] - 1
    var = 0.0
    for k in range(B - 1):
        y = k if forward else B - 2 - k
        old = e[y + 1]
        new = _update(e, y, pcx, ratio, off)
        d = abs(new - old)
        if d > var:
            var = d
        v = old + omega * (new - old)
        if v < e[y]:
            v = e[y]
        elif v > e[y + 2]:
            v = e[y + 2]
        e[y + 1] = v
    return var


@numba.njit(cache=True)
def _iterate_relaxed(e, pcx, ratio, off, eps, max_sweeps, omega):
    sweeps = 0
    while sweeps + 2 <= max_sweeps:
        var = _relaxed_sweep(e, pcx, ratio, off, True, omega)
        v2 = _relaxed_sweep(e, pcx, ratio, off, False, omega)
        sweeps += 2
        if var < eps and v2 < eps:
            break
    return sweeps


@numba.njit(cache=True)
def _iterate(e, pcx, ratio, off, eps, max_sweeps):
    sweeps = 0
    var = np.inf
    while sweeps + 2 <= max_sweeps:
        var = _sweep(e, pcx, ratio, off, True)
        v2 = _sweep(e, pcx, ratio, off, False)
        if v2 > var:
            var = v2
        sweeps += 2
        if var < eps:
            break
    return sweeps, var


def _ratio_table(B: int, alpha: float) -> tuple[np.ndarray, int]:
    off = 2 * B
    g = np.arange(-off, off + 1, dtype=np.float64)
    with np.errstate(over="ignore"):
        return np.exp(g * math.log(alpha)), off


def bfi_solve(pcx, cfg: BfiConfig, init=None, relax: float = 1.0) -> BfiResult:
    """Run the sweeps until the largest coordinate move falls below epsilon.

    ``init`` is any valid cumulative vector; the default is uniform.  With
    ``relax > 1`` an over-relaxed phase runs first to get near the fixed
    point quickly; plain sweeps always finish the job, so the stopping rule
    is the same either way.  ``sweeps`` counts passes of both phases.
    """
    if not 1.0 <= relax < 2.0:
        raise ValueError("relax must lie in [1, 2)")
    pcx = np.ascontiguousarray(pcx, dtype=np.float64)
    _check_cumulative(pcx)
    B = pcx.size - 1
    if cfg.identity:
        return BfiResult(pcx.copy(), 0, True, 0.0)
    if cfg.uniform:
        return BfiResult(np.arange(B + 1) / B, 0, True, 0.0)
    if init is None:
        e = np.arange(B + 1) / B
    else:
        e = np.array(init, dtype=np.float64)
        _check_cumulative(e)
    ratio, off = _ratio_table(B, cfg.alpha)
    pre = 0
    if relax > 1.0:
        pre = _iterate_relaxed(e, pcx, ratio, off, cfg.epsilon, cfg.max_sweeps // 2, relax)
    sweeps, var = _iterate(e, pcx, ratio, off, cfg.epsilon, cfg.max_sweeps - pre)
    sweeps += pre
    converged = bool(var < cfg.epsilon)
    return BfiResult(e, int(sweeps), converged, float(var))


def default_relax(alpha: float) -> float:
    """Over-relaxation factor used by the codecs for a given alpha.

    Small alpha means near-flat targets and very slow plain sweeps, where
    heavy relaxation pays off; above ~1.05 plain sweeps are already quick and
    relaxation only overshoots.
    """
    if alpha < 1.005:
        return 1.9
    if alpha < 1.05:
        return 1.8
    return 1.0


_CACHE: OrderedDict = OrderedDict()
_CACHE_SIZE = 1024


def bfi_estimate(pcx, cfg: BfiConfig, relax: float = 1.0) -> np.ndarray:
    """Stego cumulative pmf for host cumulative ``pcx`` (uniform start, memoized)."""
    pcx = np.ascontiguousarray(pcx, dtype=np.float64)
    key = (pcx.tobytes(), cfg, relax)
    hit = _CACHE.get(key)
    if hit is not None:
        _CACHE.move_to_end(key)
        return hit.copy()
    res = bfi_solve(pcx, cfg, relax=relax)
    if not res.converged:
        warnings.warn(
            f"BFI stopped after {res.sweeps} sweeps with offset {res.last_offset:.3g}",
            NonConvergence,
            stacklevel=2,
        )
    res.values.setflags(write=False)
    _CACHE[key] = res.values
    if len(_CACHE) > _CACHE_SIZE:
        _CACHE.popitem(last=False)
    return res.values.copy()


def fixed_point_offset(e, pcx, alpha: float) -> float:
    """Largest single-coordinate update in one more forward+backward pass.

    This is the same offset the stopping rule compares against epsilon.
    """
    pcx = np.ascontiguousarray(pcx, dtype=np.float64)
    if math.isinf(alpha) or alpha == 1.0:
        ref = bfi_solve(pcx, BfiConfig(alpha)).values
        return float(np.abs(np.asarray(e) - ref).max())
    e = np.array(e, dtype=np.float64)
    ratio, off = _ratio_table(pcx.size - 1, alpha)
    return float(max(_sweep(e, pcx, ratio, off, True), _sweep(e, pcx, ratio, off, False)))


def quantize(pc, n: int, present=None) -> FrequencyTable:
    """Round a cumulative pmf to integer frequencies summing to ``2**n``.

    Largest-remainder rounding on the increments.  Symbols in ``present``
    (default: every symbol with positive mass) get at least one slot; any
    surplus this creates is taken from the largest frequencies.
    """
    pc = np.asarray(pc, dtype=np.float64)
    p = np.maximum(np.diff(pc), 0.0)
    B = p.size
    total = 1 << n
    if present is None:
        must = p > 0
    else:
        must = np.zeros(B, dtype=bool)
        must[np.asarray(list(present), dtype=np.int64)] = True
    if must.sum() > total:
        raise InfeasibleTable(f"{int(must.sum())} symbols cannot fit in {total} slots")
    mass = p.sum()
    if not mass > 0:
        raise InfeasibleTable("distribution has no mass")
    f = _round_to_total(p, must, total)
    if f[0] < 0:
        raise InfeasibleTable("cannot absorb rounding surplus")
    return FrequencyTable.trusted(f)


def count_frequencies(counts, n: int) -> FrequencyTable:
    """Quantize raw counts (all positive) straight to a ``2**n`` table."""
    c = np.asarray(counts, dtype=np.float64)
    if c.size > (1 << n):
        raise InfeasibleTable(f"{c.size} symbols cannot fit in {1 << n} slots")
    f = _round_to_total(c, c > 0, 1 << n)
    if f[0] < 0:
        raise InfeasibleTable("cannot absorb rounding surplus")
    return FrequencyTable.trusted(f)


@numba.njit(cache=True)
def _round_to_total(p, must, total):
    B = p.shape[0]
    scale = total / p.sum()
    f = np.empty(B, dtype=np.int64)
    rem = np.empty(B)
    acc = 0
    for k in range(B):
        x = p[k] * scale
        fk = int(math.floor(x))
        r = x - fk
        if must[k] and fk == 0:
            fk = 1
            r = 0.0
        f[k] = fk
        rem[k] = r
        acc += fk
    diff = total - acc
    if diff > 0:
        order = np.argsort(-rem, kind="mergesort")
        for k in range(diff):
            f[order[k]] += 1
    while diff < 0:
        k = np.argmax(f)
        if f[k] <= 1:
            f[0] = -1
            return f
        f[k] -= 1
        diff += 1
    return f


def entropy(pmf) -> float:
    p = np.asarray(pmf, dtype=np.float64)
    p = p[p > 0]
    p = p / p.sum()
    return float(-(p * np.log2(p)).sum())


def expected_rate(px, py) -> float:
    """H(Y) - H(X) in bits per symbol."""
    return entropy(py) - entropy(px)


def monotone_coupling(px, py) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Order-preserving joint distribution of two pmfs on the same alphabet.

    Returns parallel arrays (host symbol, stego symbol, mass).
    """
    cx = cumulative(px)
    cy = cumulative(py)
    cuts = np.unique(np.concatenate((cx, cy)))
    mass = np.diff(cuts)
    keep = mass > 0
    mid = (cuts[:-1] + cuts[1:])[keep] / 2
    s = np.searchsorted(cx, mid, side="right") - 1
    y = np.searchsorted(cy, mid, side="right") - 1
    return s, y, mass[keep]


def expected_distortion(px, py) -> float:
    s, y, m = monotone_coupling(px, py)
    return float((m * (s - y) ** 2.0).sum())


def distortion_spread(px, py) -> float:
    """Standard deviation of the per-symbol squared error under the coupling."""
    s, y, m = monotone_coupling(px, py)
    d2 = (s - y) ** 2.0
    mean = (m * d2).sum()
    return float(math.sqrt(max((m * d2 * d2).sum() - mean * mean, 0.0)))
