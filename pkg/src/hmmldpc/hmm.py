"""Compound-state HMM decoding along a random walk.

Every walk step is a hidden state over the four values of its bit pair
``(d_i, d_j)``, ordered (0,0), (0,1), (1,0), (1,1).  Emissions marginalise the
remaining bits of the step's parity check (and, in extended mode, the two
other checks of each state bit).  Forward-backward smoothing gives per-step
posteriors which are folded back into per-bit LLRs and fed in as the
evidence of the next iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .channel import LLR_MAX, llr_to_prob
from .code import ParityCheckMatrix, syndrome
from .walk import Walk, WalkStalled, WalkStep, generate_walk, repeat_mask

# state q = 2*d_i + d_j; the next state's first bit must equal this state's second bit
TRANSITION = np.array(
    [
        [0.5, 0.5, 0.0, 0.0],
        [0.0, 0.0, 0.5, 0.5],
        [0.5, 0.5, 0.0, 0.0],
        [0.0, 0.0, 0.5, 0.5],
    ]
)
TRANSITION.setflags(write=False)

STATES = ((0, 0), (0, 1), (1, 0), (1, 1))
SIMPLE = "simple"
EXTENDED = "extended"


class DegreeMismatch(ValueError):
    pass


class UncoveredVariable(ValueError):
    pass


def parity_constrained_sum(latent_probs, required_parity: int) -> float:
    """Probability that independent bits with P(1) = ``latent_probs`` XOR to ``required_parity``."""
    t = np.prod(1.0 - 2.0 * np.asarray(latent_probs, dtype=np.float64))
    return 0.5 * (1.0 + (1 - 2 * (required_parity & 1)) * t)


def _state_probs(llr, v, forced_uniform=False):
    if forced_uniform:
        return np.array([0.5, 0.5])
    p1 = float(llr_to_prob(llr[v]))
    return np.array([1.0 - p1, p1])


def emission_simple(step: WalkStep, llr, H: ParityCheckMatrix, repeated=(False, False)) -> np.ndarray:
    """Emission column of one step from its own check only."""
    c, i, j = step.check_index, step.first_bit, step.second_bit
    latent = [v for v in H.check_supports[c] if v != i and v != j]
    lp = llr_to_prob(np.asarray(llr)[latent])
    pi = _state_probs(llr, i, repeated[0])
    pj = _state_probs(llr, j, repeated[1])
    col = np.array([pi[a] * pj[b] * parity_constrained_sum(lp, a ^ b) for a, b in STATES])
    return col / col.sum()


def emission_extended(
    step: WalkStep, llr, H: ParityCheckMatrix, repeated=(False, False), dedup: bool = False
) -> np.ndarray:
    """Simple emission times one parity factor per other check of each state bit.

    Each adjacent-check factor carries its own copy of the state bit's channel
    probability; ``dedup`` drops those extra copies.
    """
    if len(step.adjacent_checks_first) != 2 or len(step.adjacent_checks_second) != 2:
        raise DegreeMismatch(f"state bits of check {step.check_index} need exactly 2 adjacent checks each")
    llr = np.asarray(llr)
    col = emission_simple(step, llr, H, repeated)
    pi = _state_probs(llr, step.first_bit, repeated[0])
    pj = _state_probs(llr, step.second_bit, repeated[1])
    fi = np.ones(2)
    fj = np.ones(2)
    for checks, v, p, f in (
        (step.adjacent_checks_first, step.first_bit, pi, fi),
        (step.adjacent_checks_second, step.second_bit, pj, fj),
    ):
        for h in checks:
            lp = llr_to_prob(llr[[u for u in H.check_supports[h] if u != v]])
            for d in (0, 1):
                f[d] *= parity_constrained_sum(lp, d) * (1.0 if dedup else p[d])
    col = col * np.array([fi[a] * fj[b] for a, b in STATES])
    return col / col.sum()


@numba.njit(cache=True)
def _emission_kernel(check_supports, var_ptr, var_idx, checks, first, second, p1, repeated, extended, dedup):
    L = checks.shape[0]
    s = check_supports.shape[1]
    t = 1.0 - 2.0 * p1
    E = np.empty((L, 4))
    for k in range(L):
        c = checks[k]
        i = first[k]
        j = second[k]
        prod = 1.0
        for q in range(s):
            v = check_supports[c, q]
            if v != i and v != j:
                prod *= t[v]
        even = 0.5 * (1.0 + prod)
        odd = 0.5 * (1.0 - prod)
        pi1 = 0.5 if repeated[k, 0] else p1[i]
        pj1 = 0.5 if repeated[k, 1] else p1[j]
        pi = (1.0 - pi1, pi1)
        pj = (1.0 - pj1, pj1)
        fi0 = pi[0]
        fi1 = pi[1]
        fj0 = pj[0]
        fj1 = pj[1]
        if extended:
            for side in range(2):
                v = i if side == 0 else j
                w0 = 1.0
                w1 = 1.0
                for e in range(var_ptr[v], var_ptr[v + 1]):
                    h = var_idx[e]
                    if h == c:
                        continue
                    ph = 1.0
                    for q in range(s):
                        u = check_supports[h, q]
                        if u != v:
                            ph *= t[u]
                    w0 *= 0.5 * (1.0 + ph)
                    w1 *= 0.5 * (1.0 - ph)
                    if not dedup:
                        if side == 0:
                            w0 *= pi[0]
                            w1 *= pi[1]
                        else:
                            w0 *= pj[0]
                            w1 *= pj[1]
                if side == 0:
                    fi0 *= w0
                    fi1 *= w1
                else:
                    fj0 *= w0
                    fj1 *= w1
        e00 = fi0 * fj0 * even
        e01 = fi0 * fj1 * odd
        e10 = fi1 * fj0 * odd
        e11 = fi1 * fj1 * even
        z = e00 + e01 + e10 + e11
        if z <= 0.0:
            E[k, 0] = E[k, 1] = E[k, 2] = E[k, 3] = 0.25
        else:
            E[k, 0] = e00 / z
            E[k, 1] = e01 / z
            E[k, 2] = e10 / z
            E[k, 3] = e11 / z
    return E


def emission_table(
    walk: Walk,
    llr,
    H: ParityCheckMatrix,
    mode: str = SIMPLE,
    repeated: np.ndarray | None = None,
    dedup: bool = False,
) -> np.ndarray:
    """(L, 4) emission columns for every step of ``walk``."""
    if mode not in (SIMPLE, EXTENDED):
        raise ValueError(f"unknown emission mode {mode!r}")
    ptr, idx = H.var_csr
    if mode == EXTENDED:
        deg = np.diff(ptr)
        if np.any(deg[walk.first] != 3) or np.any(deg[walk.second] != 3):
            raise DegreeMismatch("extended emissions need every state bit in exactly 3 checks")
    if repeated is None:
        repeated = np.zeros((len(walk), 2), dtype=np.bool_)
    p1 = llr_to_prob(np.asarray(llr, dtype=np.float64))
    return _emission_kernel(
        H.check_supports, ptr, idx, walk.checks, walk.first, walk.second,
        p1, np.asarray(repeated, dtype=np.bool_), mode == EXTENDED, dedup,
    )


@dataclass
class FbState:
    forward: np.ndarray  # (L, 4)
    backward: np.ndarray  # (L, 4)
    posteriors: np.ndarray  # (L, 4)


@numba.njit(cache=True)
def _fb_kernel(E, T):
    L, Q = E.shape
    fwd = np.empty((L, Q))
    bwd = np.empty((L, Q))
    post = np.empty((L, Q))
    z = 0.0
    for q in range(Q):
        fwd[0, q] = E[0, q]
        z += fwd[0, q]
    for q in range(Q):
        fwd[0, q] /= z
    for k in range(1, L):
        z = 0.0
        for q in range(Q):
            acc = 0.0
            for r in range(Q):
                acc += T[r, q] * fwd[k - 1, r]
            fwd[k, q] = E[k, q] * acc
            z += fwd[k, q]
        for q in range(Q):
            fwd[k, q] /= z
    for q in range(Q):
        bwd[L - 1, q] = 1.0 / Q
    for k in range(L - 2, -1, -1):
        z = 0.0
        for q in range(Q):
            acc = 0.0
            for r in range(Q):
                acc += T[q, r] * E[k + 1, r] * bwd[k + 1, r]
            bwd[k, q] = acc
            z += acc
        for q in range(Q):
            bwd[k, q] /= z
    for k in range(L):
        z = 0.0
        for q in range(Q):
            post[k, q] = fwd[k, q] * bwd[k, q]
            z += post[k, q]
        for q in range(Q):
            post[k, q] /= z
    return fwd, bwd, post


def forward_backward(emissions, T=TRANSITION) -> FbState:
    """Smoothed state posteriors for a chain with a uniform prior on the first state.

    Forward messages are filtered distributions, backward messages are the
    likelihood of the remaining evidence; all are renormalised at every step.
    """
    E = np.ascontiguousarray(emissions, dtype=np.float64)
    if E.ndim != 2 or E.shape[0] < 1:
        raise ValueError("need at least one emission column")
    fwd, bwd, post = _fb_kernel(E, np.ascontiguousarray(T, dtype=np.float64))
    return FbState(forward=fwd, backward=bwd, posteriors=post)


@numba.njit(cache=True)
def _aggregate_kernel(post, first, second, N, llr_max):
    total = np.zeros(N)
    count = np.zeros(N, np.int64)
    for k in range(post.shape[0]):
        for pos in range(2):
            if pos == 0:
                v = first[k]
                p1 = post[k, 2] + post[k, 3]
                p0 = post[k, 0] + post[k, 1]
            else:
                v = second[k]
                p1 = post[k, 1] + post[k, 3]
                p0 = post[k, 0] + post[k, 2]
            if p1 <= 0.0:
                x = -llr_max
            elif p0 <= 0.0:
                x = llr_max
            else:
                x = min(max(np.log(p1) - np.log(p0), -llr_max), llr_max)
            total[v] += x
            count[v] += 1
    return total, count


def posterior_to_llr(fb, walk: Walk, N: int) -> np.ndarray:
    """Mean over occurrences of each bit's marginal LLR, clamped to +-LLR_MAX."""
    post = fb.posteriors if isinstance(fb, FbState) else np.asarray(fb, dtype=np.float64)
    total, count = _aggregate_kernel(post, walk.first, walk.second, N, LLR_MAX)
    if np.any(count == 0):
        raise UncoveredVariable(f"variables {np.flatnonzero(count == 0)[:10].tolist()} never visited")
    return np.clip(total / count, -LLR_MAX, LLR_MAX)


@dataclass
class HmmResult:
    llr_out: np.ndarray
    decoded: bool
    iterations_used: int
    first_iteration_llrs: np.ndarray
    unsatisfied: int
    trace: list = field(default_factory=list)

    @property
    def hard(self) -> np.ndarray:
        return (self.llr_out > 0).astype(np.uint8)


def hmm_iterate(
    llr_channel,
    walk: Walk,
    H: ParityCheckMatrix,
    iters: int = 5,
    mode: str = SIMPLE,
    disable_repeats: bool = False,
    dedup: bool = False,
    trace: bool = False,
) -> HmmResult:
    """Decision-feedback iterations of forward-backward along one fixed walk."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    evidence = np.asarray(llr_channel, dtype=np.float64)
    repeated = repeat_mask(walk) if disable_repeats else None
    first = None
    history = []
    for it in range(1, iters + 1):
        E = emission_table(walk, evidence, H, mode, repeated, dedup)
        fb = forward_backward(E)
        evidence = posterior_to_llr(fb, walk, H.N)
        if first is None:
            first = evidence
        if trace:
            history.append(evidence)
        unsat = int(syndrome(evidence > 0, H).sum())
        if unsat == 0 and np.all(evidence != 0):
            return HmmResult(evidence, True, it, first, 0, history)
    return HmmResult(evidence, False, iters, first, unsat, history)


@dataclass
class MultiwalkResult:
    result: HmmResult  # the successful walk, else the last one tried
    first_iteration_llrs: np.ndarray  # (walks, N)
    best_walk_output: np.ndarray
    best_unsatisfied: int
    walks_used: int

    @property
    def decoded(self) -> bool:
        return self.result.decoded


def walk_for(H: ParityCheckMatrix, seed: tuple, w: int, max_retries: int = 10) -> Walk:
    """Walk number ``w`` of the schedule keyed by ``seed``; stalls retry with a new sub-key."""
    for attempt in range(max_retries):
        try:
            return generate_walk(H, np.random.SeedSequence((*seed, w, attempt)))
        except WalkStalled:
            continue
    raise WalkStalled(f"walk {w} stalled {max_retries} times")


def _key(seed) -> tuple:
    if isinstance(seed, (int, np.integer)):
        return (int(seed),)
    return tuple(int(x) for x in seed)


def hmm_multiwalk(
    llr_channel,
    H: ParityCheckMatrix,
    max_walks: int = 100,
    iters: int = 5,
    mode: str = SIMPLE,
    seed=0,
    disable_repeats: bool = False,
    dedup: bool = False,
    trace: bool = False,
) -> MultiwalkResult:
    """Try fresh walks, each restarting from the channel LLRs, until one decodes."""
    if max_walks < 1:
        raise ValueError("max_walks must be >= 1")
    key = _key(seed)
    rows = []
    best_out, best_unsat = None, None
    res = None
    for w in range(max_walks):
        walk = walk_for(H, key, w)
        res = hmm_iterate(llr_channel, walk, H, iters, mode, disable_repeats, dedup, trace)
        rows.append(res.first_iteration_llrs)
        if best_unsat is None or res.unsatisfied < best_unsat:
            best_out, best_unsat = res.llr_out, res.unsatisfied
        if res.decoded:
            break
    return MultiwalkResult(res, np.array(rows), best_out, best_unsat, len(rows))


def first_iteration_matrix(
    llr_channel,
    H: ParityCheckMatrix,
    n_walks: int,
    mode: str = SIMPLE,
    seed=0,
    dedup: bool = False,
    disable_repeats: bool = False,
) -> np.ndarray:
    """One forward-backward pass per walk; rows are the resulting LLR vectors."""
    key = _key(seed)
    rows = []
    for w in range(n_walks):
        walk = walk_for(H, key, w)
        repeated = repeat_mask(walk) if disable_repeats else None
        fb = forward_backward(emission_table(walk, llr_channel, H, mode, repeated, dedup))
        rows.append(posterior_to_llr(fb, walk, H.N))
    return np.array(rows)
