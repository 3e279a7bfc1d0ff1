"""Random walks over the checks of H that define one HMM chain.

Each step is a compound state: a check plus an ordered pair of its variables
``(first, second)``.  Consecutive steps share a variable, ``second[k] ==
first[k + 1]``, and that variable lies in both checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numba
import numpy as np

from .code import ParityCheckMatrix

UNVISITED_BIAS = 0.9
LENGTH_CAP_FACTOR = 20


class WalkStalled(RuntimeError):
    pass


@dataclass(frozen=True)
class WalkStep:
    check_index: int
    first_bit: int
    second_bit: int
    adjacent_checks_first: tuple
    adjacent_checks_second: tuple


@dataclass(frozen=True, eq=False)
class Walk:
    checks: np.ndarray
    first: np.ndarray
    second: np.ndarray
    N: int

    def __len__(self) -> int:
        return len(self.checks)

    def __eq__(self, other):
        if not isinstance(other, Walk):
            return NotImplemented
        return (
            self.N == other.N
            and np.array_equal(self.checks, other.checks)
            and np.array_equal(self.first, other.first)
            and np.array_equal(self.second, other.second)
        )

    @cached_property
    def visit_counts(self) -> np.ndarray:
        return np.bincount(np.concatenate([self.first, self.second]), minlength=self.N)

    def step(self, k: int, H: ParityCheckMatrix) -> WalkStep:
        c, i, j = int(self.checks[k]), int(self.first[k]), int(self.second[k])
        return WalkStep(
            check_index=c,
            first_bit=i,
            second_bit=j,
            adjacent_checks_first=tuple(int(x) for x in H.var_supports[i] if x != c),
            adjacent_checks_second=tuple(int(x) for x in H.var_supports[j] if x != c),
        )

    def steps(self, H: ParityCheckMatrix) -> list[WalkStep]:
        return [self.step(k, H) for k in range(len(self))]

    def to_json(self) -> list[dict]:
        return [
            {"check": int(c), "i": int(i), "j": int(j)}
            for c, i, j in zip(self.checks, self.first, self.second)
        ]

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def from_json(cls, doc, N: int) -> "Walk":
        arr = np.array([[d["check"], d["i"], d["j"]] for d in doc], dtype=np.int64).reshape(-1, 3)
        return cls(checks=arr[:, 0].copy(), first=arr[:, 1].copy(), second=arr[:, 2].copy(), N=N)


def check_walk(walk: Walk, H: ParityCheckMatrix) -> None:
    """Raise AssertionError when the chaining or coverage invariant fails."""
    cs = H.check_supports
    for k in range(len(walk)):
        c, i, j = walk.checks[k], walk.first[k], walk.second[k]
        assert i != j, f"step {k}: repeated bit {i}"
        assert i in cs[c] and j in cs[c], f"step {k}: bits not in check {c}"
        if k + 1 < len(walk):
            assert walk.first[k + 1] == j, f"boundary {k}: shared bit mismatch"
            assert j in cs[walk.checks[k + 1]], f"boundary {k}: shared bit not in next check"
    assert np.all(walk.visit_counts >= 1), "walk does not cover every variable"


@numba.njit(cache=True)
def _walk_kernel(check_supports, var_ptr, var_idx, N, uniforms, cap, bias):
    M, s = check_supports.shape
    checks = np.empty(cap, np.int64)
    first = np.empty(cap, np.int64)
    second = np.empty(cap, np.int64)
    visited = np.zeros(N, np.bool_)
    cand = np.empty(s, np.int64)
    fresh = np.empty(s, np.int64)
    u = 0

    c = min(int(uniforms[u] * M), M - 1)
    u += 1
    a = min(int(uniforms[u] * s), s - 1)
    u += 1
    b = min(int(uniforms[u] * (s - 1)), s - 2)
    u += 1
    if b >= a:
        b += 1
    i = check_supports[c, a]
    j = check_supports[c, b]
    checks[0] = c
    first[0] = i
    second[0] = j
    visited[i] = True
    visited[j] = True
    n_seen = 2
    length = 1
    while n_seen < N:
        if length == cap or u + 3 > uniforms.shape[0]:
            return checks[:length], first[:length], second[:length], False
        # next check: any other check containing j, else stay on c
        deg = var_ptr[j + 1] - var_ptr[j]
        if deg > 1:
            r = min(int(uniforms[u] * (deg - 1)), deg - 2)
            n = 0
            for t in range(var_ptr[j], var_ptr[j + 1]):
                if var_idx[t] != c:
                    if n == r:
                        c = var_idx[t]
                        break
                    n += 1
        u += 1
        n_cand = 0
        n_fresh = 0
        for t in range(s):
            v = check_supports[c, t]
            if v != j:
                cand[n_cand] = v
                n_cand += 1
                if not visited[v]:
                    fresh[n_fresh] = v
                    n_fresh += 1
        if n_fresh > 0 and uniforms[u] < bias:
            nxt = fresh[min(int(uniforms[u + 1] * n_fresh), n_fresh - 1)]
        else:
            nxt = cand[min(int(uniforms[u + 1] * n_cand), n_cand - 1)]
        u += 2
        checks[length] = c
        first[length] = j
        second[length] = nxt
        length += 1
        if not visited[nxt]:
            visited[nxt] = True
            n_seen += 1
        j = nxt
    return checks[:length], first[:length], second[:length], True


def generate_walk(H: ParityCheckMatrix, seed, length_cap: int | None = None) -> Walk:
    """Draw a covering walk; deterministic in ``seed`` (int, entropy tuple or SeedSequence)."""
    cap = LENGTH_CAP_FACTOR * H.N if length_cap is None else int(length_cap)
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    ptr, idx = H.var_csr
    # a prefix of the uniform stream usually suffices; the full draw replays it exactly
    for n in (min(3 * cap, 12 * H.N), 3 * cap):
        uniforms = np.random.default_rng(seed).random(n + 3)
        checks, first, second, covered = _walk_kernel(
            H.check_supports, ptr, idx, H.N, uniforms, cap, UNVISITED_BIAS
        )
        if covered or len(checks) == cap:
            break
    if not covered:
        raise WalkStalled(f"walk reached {cap} steps before covering all {H.N} variables")
    return Walk(checks=checks.copy(), first=first.copy(), second=second.copy(), N=H.N)


def repeat_mask(walk: Walk) -> np.ndarray:
    """(L, 2) flags: position (k, 0) is the first bit, (k, 1) the second bit.

    A position is repeated when its variable already occurred at an earlier step.
    """
    L = len(walk)
    steps = np.arange(L)
    first_seen = np.full(walk.N, L, dtype=np.int64)
    np.minimum.at(first_seen, walk.first, steps)
    np.minimum.at(first_seen, walk.second, steps)
    return np.stack([first_seen[walk.first] < steps, first_seen[walk.second] < steps], axis=1)


def repeated_positions(walk: Walk) -> set[int]:
    return set(np.flatnonzero(repeat_mask(walk).any(axis=1)).tolist())
