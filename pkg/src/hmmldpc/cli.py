"""Command-line entry point: ``python -m hmmldpc {construct,fer,frame,stages}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .code import CodeParameters, ConstructionFailed, build_code, to_alist
from .hmm import EXTENDED, SIMPLE
from .sim import (
    ConfigError,
    SimConfig,
    points_to_csv,
    run_fer_sweep,
    run_single_frame,
    write_results,
)
from .staged import DecoderConfig


def parse_ebn0(text: str) -> tuple[float, ...]:
    """``a:b:step`` (inclusive of b) or a comma-separated list."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"expected a:b:step, got {text!r}")
        a, b, step = map(float, parts)
        if step <= 0 or b < a:
            raise argparse.ArgumentTypeError(f"empty range {text!r}")
        n = int(np.floor((b - a) / step + 1e-9)) + 1
        return tuple(round(a + k * step, 10) for k in range(n))
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def parse_mask(text: str) -> tuple[int, ...]:
    try:
        mask = tuple(sorted({int(x) for x in text.split(",") if x.strip()}))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if not mask or not set(mask) <= {1, 2, 3, 4}:
        raise argparse.ArgumentTypeError(f"stage mask must be drawn from 1,2,3,4: {text!r}")
    return mask


def _code_args(p):
    p.add_argument("--code-file", help="code JSON or .alist; overrides --frame-bits")
    p.add_argument("--frame-bits", type=int, default=128, help="N for a freshly built (3,6) code")
    p.add_argument("--code-seed", type=int, default=1, help="construction seed")


def _decoder_args(p):
    p.add_argument("--ebn0", type=parse_ebn0, default=(2.5,), help="a:b:step or comma list (dB)")
    p.add_argument("--decoder", choices=("bp", "hmm"), default="hmm")
    p.add_argument("--walks", type=int, default=100, help="max random walks per attempt")
    p.add_argument("--iters", type=int, default=5, help="HMM iterations per walk")
    p.add_argument("--bp-iters", type=int, default=250)
    p.add_argument("--stage-mask", type=parse_mask, default=(1, 2, 3, 4))
    p.add_argument("--erase-max", type=float, default=0.20)
    p.add_argument("--erase-step", type=float, default=0.02)
    p.add_argument("--repair2", action="store_true", help="enumerate <=2 bit corrections inside the decoder")
    p.add_argument("--disable-repeats", action="store_true", help="uniform emissions for repeated bits")
    p.add_argument("--extended-dedup", action="store_true", help="count each bit's channel evidence once in extended emissions")
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--noiseless", action="store_true")


def _sweep_args(p):
    p.add_argument("--frames", type=int, default=1000)
    p.add_argument("--min-errors", type=int, default=None, help="stop a point once this many frame errors occur")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="CSV path")
    p.add_argument("--json", help="JSON path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hmmldpc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="build a regular (3,6) code and write it as JSON or alist")
    p.add_argument("--frame-bits", type=int, default=128)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", help="output path; .alist writes alist, anything else JSON; default stdout JSON")
    p.add_argument("--alist", action="store_true", help="write alist to stdout")

    p = sub.add_parser("fer", help="frame-error-rate sweep")
    _code_args(p)
    _decoder_args(p)
    _sweep_args(p)

    p = sub.add_parser("stages", help="sweep with the staged decoder and tabulate stage counts")
    _code_args(p)
    _decoder_args(p)
    _sweep_args(p)

    p = sub.add_parser("frame", help="decode a single frame, optionally with traces")
    _code_args(p)
    _decoder_args(p)
    p.add_argument("--frame", type=int, default=0, help="frame index within the seed schedule")
    p.add_argument("--emission", choices=(SIMPLE, EXTENDED), default=SIMPLE, help="emission model of the traced walk")
    p.add_argument("--trace", help="directory for walk dump and JSON-lines LLR traces")
    return parser


def config_from_args(args) -> SimConfig:
    dc = DecoderConfig(
        max_walks=args.walks,
        iters=args.iters,
        bp_iters=args.bp_iters,
        erase_step=args.erase_step,
        erase_max=args.erase_max,
        stage_mask=args.stage_mask,
        repair2=args.repair2,
        extended_dedup=args.extended_dedup,
        disable_repeats=args.disable_repeats,
    )
    return SimConfig(
        ebn0_db=args.ebn0,
        frames=getattr(args, "frames", 1),
        frame_bits=args.frame_bits,
        code_seed=args.code_seed,
        code_file=args.code_file,
        min_errors=getattr(args, "min_errors", None),
        decoder=args.decoder,
        decoder_config=dc,
        master_seed=args.seed,
        workers=getattr(args, "workers", 1),
        noiseless=args.noiseless,
    )


def _construct(args) -> int:
    code = build_code(CodeParameters.from_frame_bits(args.frame_bits), args.seed)
    if args.out:
        code.save(args.out)
    elif args.alist:
        sys.stdout.write(to_alist(code.H))
    else:
        json.dump(code.to_json(), sys.stdout)
        sys.stdout.write("\n")
    return 0


def _sweep(args, table: bool) -> int:
    cfg = config_from_args(args)

    def progress(ebn0, n, errors):
        logging.info("%.2f dB  frames=%d  errors=%d", ebn0, n, errors)

    points = run_fer_sweep(cfg, progress=progress)
    write_results(points, cfg, args.out, args.json)
    if table:
        print(f"{'Eb/N0':>6} {'frames':>7} {'stage1':>7} {'stage2':>7} {'stage3':>7} {'stage4':>7} {'failed':>7}")
        for pt in points:
            sc = pt.stage_counts
            print(f"{pt.ebn0_db:6.2f} {pt.frames:7d} {sc[1]:7d} {sc[2]:7d} {sc[3]:7d} {sc[4]:7d} {sc['failed']:7d}")
    elif not args.out:
        sys.stdout.write(points_to_csv(points))
    return 0


def _frame(args) -> int:
    cfg = config_from_args(args)
    outcome, bit_errors = run_single_frame(cfg, args.frame, args.trace, emission=args.emission)
    print(json.dumps({
        "stage": outcome.stage,
        "success": outcome.success,
        "bit_errors": bit_errors,
        "walks_used": outcome.walks_used,
        "bp_invocations": outcome.bp_invocations,
        "erasure_fraction": outcome.erasure_fraction,
    }))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "construct":
            return _construct(args)
        if args.command == "frame":
            return _frame(args)
        return _sweep(args, table=args.command == "stages")
    except (ConfigError, ConstructionFailed, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
