"""Command-line front end: ``embed``, ``extract`` and ``sweep``.

Media with a ``.pgm`` suffix are treated as images; anything else is a raw
byte sequence (one symbol per byte).  Exit codes: 0 ok, 1 usage, 2 data error.
"""
from __future__ import annotations

import argparse
import csv
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .ans import CodecParams
from .bfi import BfiConfig, InfeasibleTable, cumulative, expected_distortion, expected_rate
from .bitio import MessageContainer, StackUnderflow
from .experiments import SweepRow, run_point
from .image import build_lookup_table, embed_image, extract_image, format_pgm, parse_pgm, predict_all
from .rdh import DEFAULT_REFRESH, Desync, StaticTables, embed_dynamic, embed_static, extract_dynamic, extract_static
from .sidecar import Sidecar, SidecarError

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _float_list(text: str) -> list[float]:
    return [_float(t) for t in text.split(",") if t]


def _params(text: str) -> CodecParams:
    try:
        T, n, v = (int(t) for t in text.split(","))
        return CodecParams(T=T, n=n, v=v)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"--params expects T,n,v: {exc}") from None


def _is_image(path: str) -> bool:
    return Path(path).suffix.lower() == ".pgm"


def _write_atomic(outputs: list[tuple[str, bytes]]) -> None:
    # everything is computed before the first byte hits the disk
    staged = []
    try:
        for path, data in outputs:
            d = os.path.dirname(os.path.abspath(path))
            fd, tmp = tempfile.mkstemp(dir=d, prefix=".ardh-")
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            staged.append((tmp, path))
        for tmp, path in staged:
            os.replace(tmp, path)
    finally:
        for tmp, _ in staged:
            if os.path.exists(tmp):
                os.unlink(tmp)


def _expected_from_tables(tables: StaticTables, ctxs: np.ndarray) -> tuple[float, float]:
    ids, counts = np.unique(ctxs, return_counts=True)
    rate = dist = 0.0
    for ctx, k in zip(ids.tolist(), counts.tolist()):
        host, stego = tables(ctx)
        rate += k * expected_rate(host.pmf(), stego.pmf())
        dist += k * expected_distortion(host.pmf(), stego.pmf())
    return rate / ctxs.size, dist / ctxs.size


def cmd_embed(args) -> int:
    params = args.params
    cfg = BfiConfig(args.alpha, args.epsilon)
    msg = MessageContainer.from_bytes(Path(args.msg).read_bytes())
    data = Path(args.inp).read_bytes()
    if _is_image(args.inp):
        img = parse_pgm(data)
        stego, payload = embed_image(img, msg, args.mode, cfg, params, refresh=args.refresh)
        side = Sidecar(payload, "image", (img.height, img.width))
        out_bytes = format_pgm(stego)
        host, stego_seq = img.pixels.ravel().astype(np.int64), payload.stego
    else:
        host = np.frombuffer(data, dtype=np.uint8).astype(np.int64)
        if host.size == 0:
            raise UsageError("host file is empty")
        pcx = None
        if args.mode == "static":
            pcx = cumulative(np.bincount(host, minlength=params.B))
            payload = embed_static(host, pcx, cfg, msg, params)
        else:
            payload = embed_dynamic(host, msg, params, cfg, refresh=args.refresh)
        side = Sidecar(payload, "raw", (1, host.size), pcx)
        stego_seq = payload.stego
        out_bytes = stego_seq.astype(np.uint8).tobytes()
    _write_atomic([(args.out, out_bytes), (args.meta, side.to_bytes())])
    err = float(((stego_seq - host) ** 2).mean())
    print(f"embedded bits: {payload.embedded_bits}")
    print(f"message bits recoverable: {payload.message_bits} of {msg.original_len}")
    print(f"rate: {payload.rate:.6f} bpp")
    print(f"mse: {err:.6f}")
    if side.kind == "image":
        print(f"psnr: {10 * math.log10(255.0**2 / err) if err else math.inf:.4f} dB")
    if args.expected:
        if side.kind == "image":
            K = build_lookup_table(host.reshape(side.shape), "static")
            tables = StaticTables(cfg, params, lambda ctx: cumulative(K[ctx]), payload.relax)
            ctxs = predict_all(host.reshape(side.shape)).ravel()
        else:
            hist = cumulative(np.bincount(host, minlength=params.B))
            tables = StaticTables(cfg, params, lambda ctx: hist, payload.relax)
            ctxs = np.zeros(host.size, dtype=np.int64)
        r, d = _expected_from_tables(tables, ctxs)
        print(f"expected rate: {r:.6f} bpp")
        print(f"expected mse: {d:.6f}")
    return EXIT_OK


def cmd_extract(args) -> int:
    side_bytes = Path(args.meta).read_bytes()
    side = Sidecar.from_bytes(side_bytes)
    payload = side.payload
    data = Path(args.inp).read_bytes()
    if side.kind == "image":
        img = parse_pgm(data)
        if (img.height, img.width) != side.shape:
            raise SidecarError(f"stego image is {img.height}x{img.width}, sidecar says {side.shape[0]}x{side.shape[1]}")
        payload.stego = img.pixels.ravel().astype(np.int64)
        host, msg = extract_image(img, payload)
        out_bytes = format_pgm(host)
    else:
        stego = np.frombuffer(data, dtype=np.uint8).astype(np.int64)
        if stego.size != side.shape[1]:
            raise SidecarError(f"stego has {stego.size} symbols, sidecar says {side.shape[1]}")
        payload.stego = stego
        if payload.mode == "static":
            if side.pcx is None:
                raise SidecarError("static sidecar lacks the host distribution")
            host, msg = extract_static(payload, side.pcx)
        else:
            host, msg = extract_dynamic(payload)
        out_bytes = host.astype(np.uint8).tobytes()
    bits = msg.bits()[: payload.message_bits]
    trimmed = MessageContainer.from_bits(bits)
    _write_atomic([(args.out, out_bytes), (args.msg_out, trimmed.to_bytes())])
    print(f"recovered message bits: {len(bits)}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    modes = ["static", "dynamic"] if args.mode == "both" else [args.mode]
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(SweepRow.header())
    for sigma in args.sigma:
        for alpha in args.alpha:
            for mode in modes:
                row = run_point(sigma, alpha, args.n, args.seed, mode, args.params, args.refresh)
                w.writerow(row.values())
                sys.stdout.flush()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ansrdh", description="Reversible data hiding with ANS coding.")
    sub = p.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    e = sub.add_parser("embed", help="hide a message in raw bytes or a PGM image")
    e.add_argument("--mode", choices=("static", "dynamic"), default="static")
    e.add_argument("--alpha", type=_float, required=True, help="distortion weight; 'inf' leaves the host unchanged")
    e.add_argument("--epsilon", type=_float, default=1e-9)
    e.add_argument("--in", dest="inp", required=True)
    e.add_argument("--msg", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--meta", required=True)
    e.add_argument("--params", type=_params, default=CodecParams(), help="T,n,v (default 16,16,1)")
    e.add_argument("--refresh", type=int, default=DEFAULT_REFRESH, help="dynamic-mode stego table refresh interval")
    e.add_argument("--expected", action="store_true", help="also print the predicted rate and MSE")
    e.set_defaults(func=cmd_embed)

    x = sub.add_parser("extract", help="recover host and message")
    x.add_argument("--in", dest="inp", required=True)
    x.add_argument("--meta", required=True)
    x.add_argument("--out", required=True)
    x.add_argument("--msg-out", required=True)
    x.set_defaults(func=cmd_extract)

    s = sub.add_parser("sweep", help="rate-distortion points on discrete-normal hosts, as CSV")
    s.add_argument("--sigma", type=_float_list, default=[128.0, 256.0, 512.0])
    s.add_argument("--alpha", type=_float_list, default=[1.0001, 1.001, 1.01])
    s.add_argument("--n", type=int, default=65536)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--mode", choices=("static", "dynamic", "both"), default="static")
    s.add_argument("--params", type=_params, default=CodecParams())
    s.add_argument("--refresh", type=int, default=DEFAULT_REFRESH)
    s.set_defaults(func=cmd_sweep)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if getattr(args, "refresh", 1) < 1 or getattr(args, "n", 1) < 1:
            raise UsageError("--refresh and --n must be positive")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, SidecarError, Desync, InfeasibleTable, StackUnderflow, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
