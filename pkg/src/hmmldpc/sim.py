"""Monte Carlo frame-error-rate campaigns.

Every frame draws from its own generator keyed by (master_seed, point index,
frame index), so results do not depend on the number of worker processes or
on the order in which frames finish.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import multiprocessing as mp
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import norm

from .bp import bp_decode
from .channel import ChannelParams, awgn, channel_llr, modulate
from .code import CodeParameters, LdpcCode, build_code
from .hmm import SIMPLE, hmm_iterate, walk_for
from .staged import FAILED, DecodeOutcome, DecoderConfig, decode

log = logging.getLogger(__name__)

CSV_HEADER = (
    "ebn0_db,frames,errors,fer,ci_low,ci_high,stage1,stage2,stage3,stage4,failed,mean_walks,wall_s"
)
MAX_SCORED_ERRORS = 2
BATCH = 50


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    ebn0_db: tuple = (2.7,)
    frames: int = 1000
    frame_bits: int = 128
    code_seed: int = 1
    code_file: str | None = None
    min_errors: int | None = None
    decoder: str = "hmm"
    decoder_config: DecoderConfig = field(default_factory=DecoderConfig)
    master_seed: int = 0
    workers: int = 1
    noiseless: bool = False

    def __post_init__(self):
        if self.frames < 1:
            raise ConfigError("frames must be >= 1")
        if not len(self.ebn0_db):
            raise ConfigError("need at least one Eb/N0 point")
        if self.decoder not in ("bp", "hmm"):
            raise ConfigError(f"unknown decoder {self.decoder!r}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.min_errors is not None and self.min_errors < 1:
            raise ConfigError("min_errors must be >= 1")

    def load_code(self) -> LdpcCode:
        if self.code_file:
            return LdpcCode.load(self.code_file)
        if self.frame_bits % 2:
            raise ConfigError("frame_bits must be even for a rate-1/2 code")
        return build_code(CodeParameters.from_frame_bits(self.frame_bits), self.code_seed)


@dataclass
class FerPoint:
    ebn0_db: float
    frames: int
    errors: int
    fer: float
    ci_low: float
    ci_high: float
    stage_counts: dict
    mean_walks: float
    wall_s: float

    def csv_row(self) -> list:
        sc = self.stage_counts
        return [
            f"{self.ebn0_db:g}", self.frames, self.errors, f"{self.fer:.6g}",
            f"{self.ci_low:.6g}", f"{self.ci_high:.6g}",
            sc[1], sc[2], sc[3], sc[4], sc[FAILED],
            f"{self.mean_walks:.4f}", f"{self.wall_s:.3f}",
        ]


def confidence_interval(errors: int, frames: int, level: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if frames < 1:
        raise ValueError("frames must be >= 1")
    z = norm.ppf(0.5 + level / 2)
    p = errors / frames
    denom = 1 + z * z / frames
    centre = (p + z * z / (2 * frames)) / denom
    half = z * np.sqrt(p * (1 - p) / frames + z * z / (4 * frames * frames)) / denom
    low = 0.0 if errors == 0 else max(0.0, float(centre - half))
    high = 1.0 if errors == frames else min(1.0, float(centre + half))
    return low, high


@dataclass
class FrameResult:
    frame: int
    bit_errors: int
    stage: object
    walks: int
    outcome: DecodeOutcome | None = None


def make_frame(code: LdpcCode, ebn0_db: float, key: tuple, noiseless: bool = False):
    """Random info bits -> codeword -> BPSK -> AWGN -> channel LLRs."""
    rng = np.random.default_rng(np.random.SeedSequence(key))
    u = rng.integers(0, 2, code.M)
    c = code.encode(u)
    ch = ChannelParams(ebn0_db, rate=code.M / code.N, noiseless=noiseless)
    y = awgn(modulate(c), ch, rng)
    return c, channel_llr(y, ch)


def decode_frame(code: LdpcCode, llr, cfg: SimConfig, key: tuple) -> DecodeOutcome:
    if cfg.decoder == "bp":
        r = bp_decode(llr, code.H, cfg.decoder_config.bp_iters)
        return DecodeOutcome(
            hard=r.hard, success=r.converged, stage=1 if r.converged else FAILED, bp_invocations=1
        )
    return decode(llr, code, cfg.decoder_config, seed=key)


def run_frame(code: LdpcCode, cfg: SimConfig, point: int, frame: int, keep_outcome=False) -> FrameResult:
    key = (cfg.master_seed, point, frame)
    c, llr = make_frame(code, cfg.ebn0_db[point], key, cfg.noiseless)
    out = decode_frame(code, llr, cfg, key)
    return FrameResult(frame, int(np.sum(out.hard != c)), out.stage, out.walks_used, out if keep_outcome else None)


_worker_state = {}


def _init_worker(code_doc, cfg):
    _worker_state["code"] = LdpcCode.from_json(code_doc)
    _worker_state["cfg"] = cfg


def _work(args):
    point, frame = args
    return run_frame(_worker_state["code"], _worker_state["cfg"], point, frame)


def run_fer_sweep(cfg: SimConfig, code: LdpcCode | None = None, progress=None) -> list[FerPoint]:
    code = code or cfg.load_code()
    pool = None
    if cfg.workers > 1:
        ctx = mp.get_context("fork")
        pool = ctx.Pool(cfg.workers, initializer=_init_worker, initargs=(code.to_json(), cfg))
    try:
        return [_run_point(code, cfg, p, pool, progress) for p in range(len(cfg.ebn0_db))]
    finally:
        if pool is not None:
            pool.close()
            pool.join()


def _run_point(code, cfg: SimConfig, p: int, pool, progress) -> FerPoint:
    t0 = time.perf_counter()
    results: list[FrameResult] = []
    errors = 0
    # error-count stopping is checked only at fixed batch boundaries so it is worker-independent
    for start in range(0, cfg.frames, BATCH):
        jobs = [(p, f) for f in range(start, min(start + BATCH, cfg.frames))]
        if pool is None:
            batch = [run_frame(code, cfg, *j) for j in jobs]
        else:
            batch = pool.map(_work, jobs, chunksize=max(1, len(jobs) // (4 * cfg.workers)))
        results.extend(batch)
        errors = sum(r.bit_errors > MAX_SCORED_ERRORS for r in results)
        if progress:
            progress(cfg.ebn0_db[p], len(results), errors)
        if cfg.min_errors is not None and errors >= cfg.min_errors:
            break
    n = len(results)
    counts = {1: 0, 2: 0, 3: 0, 4: 0, FAILED: 0}
    for r in results:
        counts[r.stage] += 1
    lo, hi = confidence_interval(errors, n)
    point = FerPoint(
        ebn0_db=float(cfg.ebn0_db[p]),
        frames=n,
        errors=errors,
        fer=errors / n,
        ci_low=lo,
        ci_high=hi,
        stage_counts=counts,
        mean_walks=float(np.mean([r.walks for r in results])),
        wall_s=time.perf_counter() - t0,
    )
    log.info("Eb/N0 %.2f dB: %d/%d frame errors", point.ebn0_db, errors, n)
    return point


def points_to_csv(points: list[FerPoint]) -> str:
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    for pt in points:
        w.writerow(pt.csv_row())
    return buf.getvalue()


def points_to_json(points: list[FerPoint], cfg: SimConfig) -> dict:
    rows = []
    for pt in points:
        d = asdict(pt)
        d["stage_counts"] = {str(k): v for k, v in pt.stage_counts.items()}
        rows.append(d)
    dc = asdict(cfg.decoder_config)
    dc["stage_mask"] = list(dc["stage_mask"])
    return {
        "config": {
            "frame_bits": cfg.frame_bits,
            "code_seed": cfg.code_seed,
            "code_file": cfg.code_file,
            "frames": cfg.frames,
            "min_errors": cfg.min_errors,
            "decoder": cfg.decoder,
            "decoder_config": dc,
            "master_seed": cfg.master_seed,
        },
        "points": rows,
    }


def write_results(points, cfg: SimConfig, csv_path=None, json_path=None) -> None:
    if csv_path:
        Path(csv_path).write_text(points_to_csv(points))
    if json_path:
        Path(json_path).write_text(json.dumps(points_to_json(points, cfg), indent=2))


def run_single_frame(
    cfg: SimConfig, frame_seed: int, trace_dir=None, code: LdpcCode | None = None, emission: str = SIMPLE
):
    """Decode one frame at the first Eb/N0 point, optionally writing forensic traces.

    With tracing on, walk 0 of the frame is also run with repeated states
    enabled and disabled, and each trajectory is written as JSON lines.
    """
    code = code or cfg.load_code()
    key = (cfg.master_seed, 0, frame_seed)
    c, llr = make_frame(code, cfg.ebn0_db[0], key, cfg.noiseless)
    outcome = decode_frame(code, llr, cfg, key)
    bit_errors = int(np.sum(outcome.hard != c))
    if trace_dir is not None:
        trace_dir = Path(trace_dir)
        trace_dir.mkdir(parents=True, exist_ok=True)
        dc = cfg.decoder_config
        walk = walk_for(code.H, (*key, 1, 0), 0)
        (trace_dir / "walk.json").write_text(walk.dumps())
        for tag, disabled in (("repeats_on", False), ("repeats_off", True)):
            res = hmm_iterate(llr, walk, code.H, dc.iters, emission, disabled, dc.extended_dedup, trace=True)
            with open(trace_dir / f"trace_{tag}.jsonl", "w") as fh:
                fh.write(json.dumps({"iteration": 0, "llr": np.round(llr, 6).tolist(), "kind": "channel"}) + "\n")
                for it, x in enumerate(res.trace, 1):
                    errs = int(np.sum((x > 0) != c))
                    fh.write(json.dumps({"iteration": it, "llr": np.round(x, 6).tolist(), "bit_errors": errs}) + "\n")
        summary = {
            "frame": frame_seed,
            "emission": emission,
            "ebn0_db": cfg.ebn0_db[0],
            "stage": outcome.stage,
            "success": outcome.success,
            "bit_errors": bit_errors,
            "walks_used": outcome.walks_used,
            "bp_invocations": outcome.bp_invocations,
            "erasure_fraction": outcome.erasure_fraction,
            "history": outcome.history,
        }
        (trace_dir / "outcome.json").write_text(json.dumps(summary, indent=2))
    return outcome, bit_errors
