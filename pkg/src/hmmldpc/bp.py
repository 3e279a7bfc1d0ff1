"""Flooding sum-product decoding on the Tanner graph."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import LLR_MAX
from .code import ParityCheckMatrix, syndrome

_TANH_CLIP = 1.0 - 1e-15


@dataclass
class BpWorkspace:
    """Per-frame message storage, one value per edge in check-major order."""

    c2v: np.ndarray
    v2c: np.ndarray
    iteration: int = 0

    @classmethod
    def for_code(cls, H: ParityCheckMatrix) -> "BpWorkspace":
        shape = H.check_supports.shape
        return cls(c2v=np.zeros(shape), v2c=np.zeros(shape))


@dataclass
class BpResult:
    llr_out: np.ndarray
    hard: np.ndarray
    converged: bool
    iters_used: int


def _check_update(v2c: np.ndarray) -> np.ndarray:
    # messages here are ln(P0/P1); leave-one-out tanh products via prefix/suffix scans
    t = np.tanh(0.5 * v2c)
    M, s = t.shape
    prefix = np.ones((M, s + 1))
    suffix = np.ones((M, s + 1))
    np.cumprod(t, axis=1, out=prefix[:, 1:])
    np.cumprod(t[:, ::-1], axis=1, out=suffix[:, 1:])
    loo = prefix[:, :s] * suffix[:, s - 1 :: -1][:, :s]
    np.clip(loo, -_TANH_CLIP, _TANH_CLIP, out=loo)
    return np.clip(2.0 * np.arctanh(loo), -LLR_MAX, LLR_MAX)


def bp_decode(llr_in, H: ParityCheckMatrix, max_iters: int = 250) -> BpResult:
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    lam = -np.asarray(llr_in, dtype=np.float64)
    var_of_edge = H.check_supports
    ws = BpWorkspace.for_code(H)
    ws.v2c[:] = lam[var_of_edge]
    posterior = lam
    hard = (posterior < 0).astype(np.uint8)
    for it in range(1, max_iters + 1):
        ws.iteration = it
        ws.c2v = _check_update(ws.v2c)
        posterior = lam + np.bincount(var_of_edge.ravel(), weights=ws.c2v.ravel(), minlength=H.N)
        hard = (posterior < 0).astype(np.uint8)
        # a tied bit is undecided, so it cannot complete a codeword
        if not syndrome(hard, H).any() and np.all(posterior != 0):
            return BpResult(np.clip(-posterior, -LLR_MAX, LLR_MAX), hard, True, it)
        ws.v2c = np.clip(posterior[var_of_edge] - ws.c2v, -LLR_MAX, LLR_MAX)
    return BpResult(np.clip(-posterior, -LLR_MAX, LLR_MAX), hard, False, max_iters)
