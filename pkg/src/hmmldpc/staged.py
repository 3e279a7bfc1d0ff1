"""Multistage decoding: HMM walks, HMM-to-BP chaining, and reliability erasure.

Stage 1 runs simple-emission HMM walks and, failing that, belief propagation
seeded with the best walk's output.  Stage 2 repeats this with extended
emissions.  Stages 3 and 4 rank bits by the spread of their first-iteration
LLRs across walks, zero the least reliable ones and retry.  A frame nothing
decodes is reported as failed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from .bp import bp_decode
from .code import LdpcCode, ParityCheckMatrix, ceil_count, syndrome
from .hmm import EXTENDED, SIMPLE, _key, first_iteration_matrix, hmm_multiwalk

GAMMA_EPS = 1e-12
GAMMA_CAP = 1e12
FAILED = "failed"


@dataclass(frozen=True)
class DecoderConfig:
    max_walks: int = 100
    iters: int = 5
    bp_iters: int = 250
    erase_step: float = 0.02
    erase_max: float = 0.20
    stage_mask: tuple = (1, 2, 3, 4)
    repair2: bool = False
    extended_dedup: bool = False
    disable_repeats: bool = False

    def __post_init__(self):
        if self.max_walks < 1 or self.iters < 1 or self.bp_iters < 1:
            raise ValueError("walk, iteration and BP budgets must be >= 1")
        if not 0 < self.erase_step <= self.erase_max <= 0.2 + 1e-12:
            raise ValueError("need 0 < erase_step <= erase_max <= 0.2")
        if not set(self.stage_mask) <= {1, 2, 3, 4}:
            raise ValueError(f"bad stage mask {self.stage_mask}")

    @property
    def erase_fractions(self) -> list[float]:
        n = int(round(self.erase_max / self.erase_step))
        return [round(k * self.erase_step, 12) for k in range(1, n + 1)]


@dataclass
class DecodeOutcome:
    hard: np.ndarray
    success: bool
    stage: object  # 1..4 or "failed"
    walks_used: int = 0
    bp_invocations: int = 0
    erasure_fraction: float = 0.0
    info: np.ndarray | None = None
    history: list = field(default_factory=list)

    def __post_init__(self):
        assert (self.stage == FAILED) == (not self.success)


def reliability_metric(x) -> float:
    """Coefficient of variation of a bit's first-iteration LLRs (sample std, n-1)."""
    x = np.asarray(x, dtype=np.float64)
    if x.size < 2:
        raise ValueError("need at least two samples")
    return float(reliability_stats(x[:, None])[0])


def reliability_stats(first_iteration_llrs) -> np.ndarray:
    """Per-bit reliability over the rows (walks) of a first-iteration LLR matrix."""
    X = np.asarray(first_iteration_llrs, dtype=np.float64)
    if X.shape[0] < 2:
        raise ValueError("need first-iteration LLRs from at least two walks")
    gamma = X.std(axis=0, ddof=1) / np.maximum(np.abs(X.mean(axis=0)), GAMMA_EPS)
    return np.minimum(gamma, GAMMA_CAP)


def sort_and_erase(llr, gamma, fraction: float) -> np.ndarray:
    """Zero the LLRs of the ceil(fraction*N) bits with the largest reliability statistic.

    Bits are ordered by (gamma, index) ascending and erased from the end.
    """
    llr = np.asarray(llr, dtype=np.float64)
    gamma = np.asarray(gamma, dtype=np.float64)
    n = ceil_count(fraction, llr.size)
    if not 0 < fraction <= 0.2 + 1e-12 or n == 0:
        raise ValueError(f"erasure fraction {fraction} outside (0, 0.2]")
    order = np.lexsort((np.arange(llr.size), gamma))
    out = llr.copy()
    out[order[llr.size - n :]] = 0.0
    return out


@lru_cache(maxsize=16)
def _syndrome_columns(H: ParityCheckMatrix):
    cols = [0] * H.N
    for m, row in enumerate(H.check_supports):
        for v in row:
            cols[int(v)] |= 1 << m
    where = {}
    for v, c in enumerate(cols):
        where.setdefault(c, []).append(v)
    return cols, where


def two_bit_repair(hard, H: ParityCheckMatrix) -> np.ndarray | None:
    """Nearest codeword within two flips, searching flip sets in lexicographic order."""
    hard = np.asarray(hard, dtype=np.uint8)
    s = syndrome(hard, H)
    if not s.any():
        return hard.copy()
    target = int("".join(map(str, s[::-1].tolist())), 2)
    cols, where = _syndrome_columns(H)
    if target in where:
        out = hard.copy()
        out[where[target][0]] ^= 1
        return out
    for a in range(H.N):
        for b in where.get(target ^ cols[a], ()):
            if b > a:
                out = hard.copy()
                out[[a, b]] ^= 1
                return out
    return None


class _Tracker:
    """Keeps counters and the best-so-far hard decision while stages run."""

    def __init__(self, llr, H, repair2):
        self.H = H
        self.repair2 = repair2
        self.walks = 0
        self.bp = 0
        self.best = (np.asarray(llr) > 0).astype(np.uint8)
        self.best_unsat = int(syndrome(self.best, H).sum())
        self.history = []

    def accept(self, llr, label) -> np.ndarray | None:
        llr = np.asarray(llr)
        hard = (llr > 0).astype(np.uint8)
        unsat = int(syndrome(hard, self.H).sum())
        self.history.append((label, unsat))
        if unsat == 0 and np.all(llr != 0):
            return hard
        if unsat < self.best_unsat:
            self.best, self.best_unsat = hard, unsat
        if self.repair2:
            return two_bit_repair(hard, self.H)
        return None


def _attempt(llr, H, cfg: DecoderConfig, mode, seed, tracker: _Tracker, label):
    mw = hmm_multiwalk(
        llr, H, cfg.max_walks, cfg.iters, mode, seed, cfg.disable_repeats, cfg.extended_dedup
    )
    tracker.walks += mw.walks_used
    done = tracker.accept(mw.result.llr_out, f"{label}:hmm")
    if done is None:
        bp = bp_decode(mw.best_walk_output, H, cfg.bp_iters)
        tracker.bp += 1
        done = tracker.accept(bp.llr_out, f"{label}:bp")
    return done, mw.first_iteration_llrs


def decode(llr_channel, code: LdpcCode | ParityCheckMatrix, config: DecoderConfig = DecoderConfig(), seed=0):
    """Run the enabled stages in order, stopping at the first success."""
    H = code.H if isinstance(code, LdpcCode) else code
    G = code.G if isinstance(code, LdpcCode) else None
    llr = np.asarray(llr_channel, dtype=np.float64)
    key = _key(seed)
    cfg = config
    t = _Tracker(llr, H, cfg.repair2)
    first = {}

    def finish(hard, stage, fraction=0.0):
        return DecodeOutcome(
            hard=hard,
            success=stage != FAILED,
            stage=stage,
            walks_used=t.walks,
            bp_invocations=t.bp,
            erasure_fraction=fraction,
            info=None if G is None else G.info_bits(hard),
            history=t.history,
        )

    for stage, mode in ((1, SIMPLE), (2, EXTENDED)):
        if stage in cfg.stage_mask:
            done, first[mode] = _attempt(llr, H, cfg, mode, (*key, stage, 0), t, f"s{stage}")
            if done is not None:
                return finish(done, stage)

    for stage, mode, source in ((3, SIMPLE, 1), (4, EXTENDED, 2)):
        if stage not in cfg.stage_mask:
            continue
        X = first.get(mode)
        if X is None or X.shape[0] < 2:
            # same walk schedule the earlier stage would have used
            X = first_iteration_matrix(
                llr, H, max(cfg.max_walks, 2), mode, (*key, source, 0),
                cfg.extended_dedup, cfg.disable_repeats,
            )
            t.walks += X.shape[0]
        gamma = reliability_stats(X)
        for r, fraction in enumerate(cfg.erase_fractions):
            erased = sort_and_erase(llr, gamma, fraction)
            done, _ = _attempt(erased, H, cfg, mode, (*key, stage, r + 1), t, f"s{stage}@{fraction:g}")
            if done is not None:
                return finish(done, stage, fraction)

    return finish(t.best, FAILED)


def load_fixture(path):
    """Read a pinned frame: returns (llr, code, expected_stage, seed, config)."""
    path = Path(path)
    doc = json.loads(path.read_text())
    code = LdpcCode.load(path.parent / doc["code_ref"])
    cfg = DecoderConfig()
    if doc.get("config"):
        overrides = dict(doc["config"])
        if "stage_mask" in overrides:
            overrides["stage_mask"] = tuple(overrides["stage_mask"])
        cfg = replace(cfg, **overrides)
    return np.asarray(doc["llr"], dtype=np.float64), code, doc["expected_stage"], doc.get("seed", 0), cfg
