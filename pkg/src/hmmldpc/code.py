"""Random regular LDPC codes over GF(2): construction, systematic generator, encoding."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np


class ConstructionFailed(RuntimeError):
    pass


class RankDeficient(ValueError):
    pass


@dataclass(frozen=True)
class CodeParameters:
    M: int
    N: int
    check_degree: int = 6
    var_degree: int = 3

    def __post_init__(self):
        if self.N != 2 * self.M:
            raise ValueError(f"rate-1/2 codes only: N={self.N} must equal 2*M={2 * self.M}")
        if self.M * self.check_degree != self.N * self.var_degree:
            raise ValueError(
                f"edge count mismatch: M*s={self.M * self.check_degree} "
                f"!= N*dv={self.N * self.var_degree}"
            )

    @property
    def R(self) -> float:
        return self.M / self.N

    @property
    def edges(self) -> int:
        return self.M * self.check_degree

    @classmethod
    def from_frame_bits(cls, N: int, check_degree: int = 6, var_degree: int = 3) -> "CodeParameters":
        return cls(M=N // 2, N=N, check_degree=check_degree, var_degree=var_degree)


@dataclass(frozen=True, eq=False)
class ParityCheckMatrix:
    """Sparse H kept as adjacency lists in both orientations.

    ``check_supports[m]`` holds the sorted variable indices of check m and
    ``var_supports[v]`` the sorted check indices containing variable v.
    Every check must have the same weight; variables may be irregular (toy
    matrices), in which case ``params`` is None and ``var_array`` unavailable.
    """

    check_supports: np.ndarray  # (M, s)
    var_supports: tuple  # N arrays of check indices
    N: int
    params: CodeParameters | None = None

    @classmethod
    def from_check_supports(cls, check_supports, N: int | None = None) -> "ParityCheckMatrix":
        cs = np.sort(np.asarray(check_supports, dtype=np.int64), axis=1)
        M, s = cs.shape
        N = int(cs.max()) + 1 if N is None else int(N)
        if cs.min() < 0 or cs.max() >= N:
            raise ValueError("variable index out of range")
        if np.any(cs[:, 1:] == cs[:, :-1]):
            raise ValueError("a check contains the same variable twice")
        order = np.argsort(cs.ravel(), kind="stable")
        counts = np.bincount(cs.ravel(), minlength=N)
        if np.any(counts == 0):
            raise ValueError("some variable is in no check")
        bounds = np.concatenate([[0], np.cumsum(counts)])
        checks_of = order // s
        vs = tuple(checks_of[bounds[v] : bounds[v + 1]] for v in range(N))
        params = None
        if np.all(counts == counts[0]) and N == 2 * M:
            params = CodeParameters(M=M, N=N, check_degree=s, var_degree=int(counts[0]))
        cs.setflags(write=False)
        return cls(check_supports=cs, var_supports=vs, N=N, params=params)

    @classmethod
    def from_dense(cls, H) -> "ParityCheckMatrix":
        H = np.asarray(H) & 1
        rows = [np.flatnonzero(r) for r in H]
        if len({len(r) for r in rows}) != 1:
            raise ValueError("row weights are not uniform")
        return cls.from_check_supports(np.array(rows), N=H.shape[1])

    @property
    def M(self) -> int:
        return self.check_supports.shape[0]

    @property
    def check_degree(self) -> int:
        return self.check_supports.shape[1]

    @cached_property
    def var_array(self) -> np.ndarray:
        degrees = {len(v) for v in self.var_supports}
        if len(degrees) != 1:
            raise ValueError("variable degrees are irregular")
        arr = np.array(self.var_supports, dtype=np.int64).reshape(self.N, degrees.pop())
        arr.setflags(write=False)
        return arr

    @cached_property
    def var_csr(self) -> tuple[np.ndarray, np.ndarray]:
        ptr = np.concatenate([[0], np.cumsum([len(v) for v in self.var_supports])]).astype(np.int64)
        idx = np.concatenate(self.var_supports).astype(np.int64)
        return ptr, idx

    def dense(self) -> np.ndarray:
        H = np.zeros((self.M, self.N), dtype=np.uint8)
        H[np.repeat(np.arange(self.M), self.check_degree), self.check_supports.ravel()] = 1
        return H

    def __eq__(self, other):
        if not isinstance(other, ParityCheckMatrix):
            return NotImplemented
        return self.N == other.N and np.array_equal(self.check_supports, other.check_supports)

    def __hash__(self):
        return hash((self.N, self.check_supports.tobytes()))

    def girth_at_least_6(self) -> bool:
        B = self.dense().astype(np.int32)
        overlap = B @ B.T
        np.fill_diagonal(overlap, 0)
        return bool(overlap.max() <= 1)


@dataclass(frozen=True, eq=False)
class GeneratorMatrix:
    """G = [I P] in systematic column order.

    Systematic position k corresponds to column ``perm[k]`` of H, so the
    first M entries of ``perm`` are the information positions.
    """

    P: np.ndarray  # (M, M) uint8
    perm: np.ndarray  # (N,)

    @property
    def M(self) -> int:
        return self.P.shape[0]

    @property
    def identity_width(self) -> int:
        return self.M

    def systematic(self) -> np.ndarray:
        return np.concatenate([np.eye(self.M, dtype=np.uint8), self.P], axis=1)

    def dense(self) -> np.ndarray:
        """Rows of G reordered into H's column order."""
        G = np.zeros((self.M, 2 * self.M), dtype=np.uint8)
        G[:, self.perm] = self.systematic()
        return G

    def info_bits(self, codeword) -> np.ndarray:
        return np.asarray(codeword)[..., self.perm[: self.M]]


def construct_regular_code(
    params: CodeParameters, seed: int, max_restarts: int = 1000, avoid_4cycles: bool = True
) -> ParityCheckMatrix:
    """Sample a regular Tanner graph by socket permutation, then repair it.

    Double edges and (optionally) 4-cycles are removed by random edge swaps;
    a restart with a fresh permutation happens when the swap budget runs out.
    """
    M, N, s, dv = params.M, params.N, params.check_degree, params.var_degree
    if s > N or dv > M:
        raise ConstructionFailed(f"degrees (s={s}, dv={dv}) exceed matrix size {M}x{N}")
    if avoid_4cycles and M > 1 and 2 * s - N >= 2:
        raise ConstructionFailed(f"every pair of weight-{s} checks on {N} variables shares >= 2 variables")
    rng = np.random.default_rng(seed)
    budget = 2000 + 20 * params.edges
    for _ in range(max_restarts):
        slots = rng.permutation(np.repeat(np.arange(N), dv)).reshape(M, s)
        if _repair(slots, N, rng, budget, avoid_4cycles):
            return ParityCheckMatrix.from_check_supports(slots, N)
    raise ConstructionFailed(f"no valid matrix for {params} after {max_restarts} restarts")


def _repair(slots: np.ndarray, N: int, rng: np.random.Generator, budget: int, avoid_4cycles: bool) -> bool:
    M, s = slots.shape
    counts = np.zeros((M, N), dtype=np.int64)
    np.add.at(counts, (np.repeat(np.arange(M), s), slots.ravel()), 1)
    B = (counts > 0).astype(np.float64)
    overlap = B @ B.T
    np.fill_diagonal(overlap, 0)
    # per-row conflict tallies, kept in step with counts and overlap
    dup = (counts > 1).sum(axis=1)
    n_over = (overlap > 1).sum(axis=1) if avoid_4cycles else np.zeros(M, dtype=np.int64)

    def row_cost(r):
        c = np.maximum(counts[r] - 1, 0).sum()
        if avoid_4cycles:
            c += np.maximum(overlap[r] - 1, 0).sum()
        return c

    def set_row(r):
        dup[r] = (counts[r] > 1).sum()
        B[r] = counts[r] > 0
        if not avoid_4cycles:
            return
        old = overlap[r] > 1
        o = B @ B[r]
        o[r] = 0
        overlap[r] = o
        overlap[:, r] = o
        new = o > 1
        n_over[:] += new.astype(np.int64) - old
        n_over[r] = new.sum()

    for _ in range(budget):
        bad = np.flatnonzero((dup > 0) | (n_over > 0))
        if bad.size == 0:
            return True
        c1 = int(rng.choice(bad))
        # prefer slots that actually participate in a conflict
        conflicted = counts[c1, slots[c1]] > 1
        if avoid_4cycles:
            partners = np.flatnonzero(overlap[c1] > 1)
            if partners.size:
                conflicted |= B[partners][:, slots[c1]].any(axis=0)
        p1 = int(rng.choice(np.flatnonzero(conflicted))) if conflicted.any() else int(rng.integers(s))
        c2 = int(rng.integers(M - 1))
        c2 += c2 >= c1
        p2 = int(rng.integers(s))
        v, u = slots[c1, p1], slots[c2, p2]
        if u == v:
            continue
        before = row_cost(c1) + row_cost(c2)
        _move(counts, slots, c1, p1, c2, p2)
        set_row(c1)
        set_row(c2)
        if row_cost(c1) + row_cost(c2) > before:
            _move(counts, slots, c1, p1, c2, p2)
            set_row(c1)
            set_row(c2)
    return not np.any((dup > 0) | (n_over > 0))


def _move(counts, slots, c1, p1, c2, p2):
    v, u = slots[c1, p1], slots[c2, p2]
    counts[c1, v] -= 1
    counts[c1, u] += 1
    counts[c2, u] -= 1
    counts[c2, v] += 1
    slots[c1, p1], slots[c2, p2] = u, v


def gf2_rref(A: np.ndarray):
    """Reduced row echelon form over GF(2); returns (R, pivot_columns)."""
    R = (np.asarray(A) & 1).astype(bool)
    m, n = R.shape
    pivots = []
    r = 0
    for c in range(n):
        if r == m:
            break
        hits = np.flatnonzero(R[r:, c])
        if hits.size == 0:
            continue
        p = r + hits[0]
        if p != r:
            R[[r, p]] = R[[p, r]]
        others = np.flatnonzero(R[:, c])
        others = others[others != r]
        R[others] ^= R[r]
        pivots.append(c)
        r += 1
    return R.astype(np.uint8), pivots


def gf2_rank(A) -> int:
    return len(gf2_rref(A)[1])


def derive_generator(H: ParityCheckMatrix | np.ndarray) -> GeneratorMatrix:
    dense = H.dense() if isinstance(H, ParityCheckMatrix) else (np.asarray(H) & 1).astype(np.uint8)
    m, n = dense.shape
    R, pivots = gf2_rref(dense)
    if len(pivots) < m:
        raise RankDeficient(f"H has GF(2) rank {len(pivots)} < {m}")
    if n != 2 * m:
        raise ValueError("systematic form [I P] needs N = 2M")
    free = np.setdiff1d(np.arange(n), pivots)
    # pivot bits are determined by the free bits: c[pivots] = A c[free]
    A = R[:, free]
    perm = np.concatenate([free, np.asarray(pivots)])
    P = np.ascontiguousarray(A.T)
    P.setflags(write=False)
    perm.setflags(write=False)
    return GeneratorMatrix(P=P, perm=perm)


def encode(u, G: GeneratorMatrix) -> np.ndarray:
    """Encode one info vector (M,) or a batch (B, M) into H's column order."""
    u = np.asarray(u, dtype=np.int64)
    if u.shape[-1] != G.M:
        raise ValueError(f"info vector length {u.shape[-1]} != M={G.M}")
    parity = (u @ G.P.astype(np.int64)) & 1
    sys = np.concatenate([u & 1, parity], axis=-1).astype(np.uint8)
    c = np.empty_like(sys)
    c[..., G.perm] = sys
    return c


def syndrome(c, H: ParityCheckMatrix) -> np.ndarray:
    c = np.asarray(c).astype(np.uint8, copy=False)
    return np.bitwise_xor.reduce(c[..., H.check_supports], axis=-1) & 1


def unsatisfied(c, H: ParityCheckMatrix) -> int:
    return int(syndrome(c, H).sum())


@dataclass(frozen=True, eq=False)
class LdpcCode:
    """A parity-check matrix paired with its systematic generator."""

    H: ParityCheckMatrix
    G: GeneratorMatrix
    seed: int | None = None

    @property
    def M(self) -> int:
        return self.H.M

    @property
    def N(self) -> int:
        return self.H.N

    def encode(self, u) -> np.ndarray:
        return encode(u, self.G)

    def syndrome(self, c) -> np.ndarray:
        return syndrome(c, self.H)

    def to_json(self) -> dict:
        return {
            "M": self.M,
            "N": self.N,
            "check_supports": self.H.check_supports.tolist(),
            "perm": self.G.perm.tolist(),
            "P_rows": [np.packbits(row).tobytes().hex() for row in self.G.P],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "LdpcCode":
        M, N = int(doc["M"]), int(doc["N"])
        cs = np.asarray(doc["check_supports"], dtype=np.int64)
        H = ParityCheckMatrix.from_check_supports(cs, N)
        if "P_rows" in doc and "perm" in doc:
            P = np.array(
                [np.unpackbits(np.frombuffer(bytes.fromhex(h), dtype=np.uint8))[:M] for h in doc["P_rows"]],
                dtype=np.uint8,
            )
            G = GeneratorMatrix(P=P, perm=np.asarray(doc["perm"], dtype=np.int64))
            if np.any((G.dense().astype(np.int64) @ H.dense().T.astype(np.int64)) & 1):
                raise ValueError("stored generator is not orthogonal to H")
        else:
            G = derive_generator(H)
        return cls(H=H, G=G)

    def save(self, path) -> None:
        path = Path(path)
        if path.suffix == ".alist":
            path.write_text(to_alist(self.H))
        else:
            path.write_text(json.dumps(self.to_json()))

    @classmethod
    def load(cls, path) -> "LdpcCode":
        path = Path(path)
        if path.suffix == ".alist":
            H = from_alist(path.read_text())
            return cls(H=H, G=derive_generator(H))
        return cls.from_json(json.loads(path.read_text()))


def build_code(params: CodeParameters, seed: int, max_tries: int = 100) -> LdpcCode:
    """Construct H and G, drawing a fresh seed whenever H is rank deficient."""
    seeds = np.random.SeedSequence(seed)
    for attempt in range(max_tries):
        s = seed if attempt == 0 else int(seeds.spawn(1)[0].generate_state(1, np.uint64)[0])
        H = construct_regular_code(params, s)
        try:
            return LdpcCode(H=H, G=derive_generator(H), seed=s)
        except RankDeficient:
            continue
    raise ConstructionFailed(f"no full-rank matrix in {max_tries} tries")


def to_alist(H: ParityCheckMatrix) -> str:
    M, N = H.M, H.N
    s = H.check_degree
    col_w = [len(v) for v in H.var_supports]
    lines = [f"{N} {M}", f"{max(col_w)} {s}", " ".join(map(str, col_w)), " ".join([str(s)] * M)]
    lines += [" ".join(str(c + 1) for c in row) for row in H.var_supports]
    lines += [" ".join(str(v + 1) for v in row) for row in H.check_supports]
    return "\n".join(lines) + "\n"


def from_alist(text: str) -> ParityCheckMatrix:
    rows = [[int(x) for x in line.split()] for line in text.splitlines() if line.strip()]
    N, M = rows[0]
    col_w = rows[2][:N]
    row_w = rows[3][:M]
    check_rows = rows[4 + N : 4 + N + M]
    supports = [[v - 1 for v in r[: row_w[m]] if v > 0] for m, r in enumerate(check_rows)]
    if len(set(row_w)) != 1:
        raise ValueError("only uniform check weights are supported")
    del col_w
    return ParityCheckMatrix.from_check_supports(np.array(supports), N)


def all_low_weight_syndromes_unique(H: ParityCheckMatrix) -> bool:
    """True when every error of weight <= 2 has a distinct nonzero syndrome."""
    cols = [0] * H.N
    for m, row in enumerate(H.check_supports):
        for v in row:
            cols[v] |= 1 << m
    seen = {0}
    for a in range(H.N):
        if cols[a] in seen:
            return False
        seen.add(cols[a])
    for a in range(H.N):
        for b in range(a + 1, H.N):
            x = cols[a] ^ cols[b]
            if x in seen:
                return False
            seen.add(x)
    return True


def ceil_count(fraction: float, n: int) -> int:
    return int(math.ceil(round(fraction * n, 9)))
