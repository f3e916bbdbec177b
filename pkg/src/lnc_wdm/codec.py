"""Generation-based linear network coding at the source and destination.

A serial stream of fixed-length blocks is striped round-robin over ``k``
lanes; the ``k`` blocks that sit at the same lane position form one
generation. Each generation is mixed into ``n = k + r`` coded blocks with a
fresh ``n x k`` coefficient matrix whose every ``k x k`` submatrix is
invertible, so any ``k`` coded blocks recover the generation.

Blocks are 1-D numpy arrays of field symbols (``uint8`` for m <= 8).
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .gf import GF, FieldSpec, field_for

DEFAULT_BLOCK_LEN = 80
# Above this many k-subsets the random matrix is not verified exhaustively
# and a Cauchy matrix (MDS by construction) is drawn instead.
VERIFY_LIMIT = 5000
MAX_RETRIES = 64


class CodecError(ValueError):
    pass


class InsufficientRankError(CodecError):
    """Fewer than k independent coded blocks are available for a generation."""

    def __init__(self, rank: int, k: int):
        super().__init__(f"rank {rank} < generation size {k}")
        self.rank = rank
        self.k = k


@dataclass(frozen=True)
class GenerationParams:
    k: int
    r: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise CodecError(f"generation size must be >= 1, got {self.k}")
        if self.r < 0:
            raise CodecError(f"redundancy must be >= 0, got {self.r}")

    @property
    def n(self) -> int:
        return self.k + self.r


@dataclass(frozen=True, eq=False)
class CodedBlock:
    generation_id: int
    vector: np.ndarray
    payload: np.ndarray


# -- stream handling ---------------------------------------------------------

def parallelize(stream: Sequence, k: int) -> list[list]:
    """Stripe ``stream`` over ``k`` lanes; block ``i`` goes to lane ``i % k``."""
    if k < 1:
        raise CodecError(f"lane count must be >= 1, got {k}")
    lanes: list[list] = [[] for _ in range(k)]
    for i, block in enumerate(stream):
        lanes[i % k].append(block)
    return lanes


def serialize(lanes: Sequence[Sequence]) -> list:
    """Inverse of :func:`parallelize`."""
    out = []
    depth = max((len(lane) for lane in lanes), default=0)
    for pos in range(depth):
        for lane in lanes:
            if pos < len(lane):
                out.append(lane[pos])
    return out


def num_generations(M: int, k: int) -> int:
    return math.ceil(M / k)


def split_generations(stream: Sequence[np.ndarray], k: int) -> tuple[list[np.ndarray], int]:
    """Group a block stream into ``k x L`` generation matrices.

    The last generation is zero-padded up to ``k`` blocks. Returns the
    generations and the true block count needed by :func:`join_generations`.
    """
    if not stream:
        return [], 0
    lanes = parallelize(stream, k)
    L = len(stream[0])
    dtype = np.asarray(stream[0]).dtype
    gens = []
    for g in range(num_generations(len(stream), k)):
        rows = []
        for lane in lanes:
            if g < len(lane):
                if len(lane[g]) != L:
                    raise CodecError("all blocks in a session must have the same length")
                rows.append(np.asarray(lane[g], dtype=dtype))
            else:
                rows.append(np.zeros(L, dtype=dtype))
        gens.append(np.stack(rows))
    return gens, len(stream)


def join_generations(gens: Iterable[np.ndarray], count: int) -> list[np.ndarray]:
    out = [row for gen in gens for row in gen]
    return out[:count]


def blocks_from_bytes(data: bytes, block_len: int = DEFAULT_BLOCK_LEN) -> list[np.ndarray]:
    """Cut ``data`` into byte blocks; the tail block is zero-filled."""
    buf = np.frombuffer(data, dtype=np.uint8)
    nblk = math.ceil(len(buf) / block_len)
    padded = np.zeros(nblk * block_len, dtype=np.uint8)
    padded[: len(buf)] = buf
    return list(padded.reshape(nblk, block_len))


# -- linear algebra over the field --------------------------------------------

def _xor_rows(F: GF, coeffs: np.ndarray, rows: np.ndarray) -> np.ndarray:
    # sum_i coeffs[i] * rows[i]
    return np.bitwise_xor.reduce(F.vmul(coeffs[:, None], rows), axis=0)


def gf_rank(matrix, F: GF | None = None) -> int:
    F = F or field_for()
    a = np.array(matrix, dtype=F.dtype, copy=True)
    if a.ndim != 2:
        raise CodecError("rank needs a 2-D matrix")
    rows, cols = a.shape
    rank = 0
    for c in range(cols):
        if rank == rows:
            break
        nz = np.nonzero(a[rank:, c])[0]
        if nz.size == 0:
            continue
        p = rank + nz[0]
        if p != rank:
            a[[rank, p]] = a[[p, rank]]
        a[rank] = F.vmul(F.inv(int(a[rank, c])), a[rank])
        below = a[rank + 1:, c].copy()
        a[rank + 1:] ^= F.vmul(below[:, None], a[rank][None, :])
        rank += 1
    return rank


def _full_rank_batch(mats: np.ndarray, F: GF) -> np.ndarray:
    """Full-rank flag for each square matrix in an ``S x k x k`` stack."""
    a = np.array(mats, dtype=F.dtype, copy=True)
    S, k, _ = a.shape
    ok = np.ones(S, dtype=bool)
    idx = np.arange(S)
    for c in range(k):
        nz = a[:, c:, c] != 0
        ok &= nz.any(axis=1)
        p = c + np.argmax(nz, axis=1)
        prow = a[idx, p].copy()
        a[idx, p] = a[:, c]
        a[:, c] = prow
        piv = a[:, c, c]
        # Singular stacks keep a zero pivot; their flag is already cleared.
        scale = np.where(piv == 0, 0, F.vinv(np.where(piv == 0, 1, piv)))
        a[:, c] = F.vmul(scale[:, None], a[:, c])
        f = a[:, :, c].copy()
        f[:, c] = 0
        a ^= F.vmul(f[:, :, None], a[:, c][:, None, :])
    return ok


def all_subsets_invertible(matrix: np.ndarray, F: GF | None = None) -> bool:
    F = F or field_for()
    matrix = np.asarray(matrix, dtype=F.dtype)
    n, k = matrix.shape
    if n < k:
        return False
    subsets = np.array(list(itertools.combinations(range(n), k)))
    return bool(_full_rank_batch(matrix[subsets], F).all())


def solve(A, Y, F: GF | None = None) -> np.ndarray:
    """Solve ``A @ X = Y`` for ``X`` by Gauss-Jordan; ``A`` is ``rows x k``.

    Extra rows beyond ``k`` are allowed; raises :class:`InsufficientRankError`
    when ``A`` has rank below ``k``.
    """
    F = F or field_for()
    A = np.asarray(A, dtype=F.dtype)
    rows, k = A.shape
    aug = np.concatenate([A, np.asarray(Y, dtype=F.dtype).reshape(rows, -1)], axis=1)
    rank = 0
    for c in range(k):
        nz = np.flatnonzero(aug[rank:, c])
        if nz.size == 0:
            continue
        p = rank + int(nz[0])
        if p != rank:
            aug[[rank, p]] = aug[[p, rank]]
        aug[rank] = F.vmul(F.inv(int(aug[rank, c])), aug[rank])
        f = aug[:, c].copy()
        f[rank] = 0
        aug ^= F.vmul(f[:, None], aug[rank][None, :])
        rank += 1
    if rank < k:
        raise InsufficientRankError(rank, k)
    return aug[:k, k:]


def solve_batch(A, Y, F: GF | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Solve a stack of systems ``A[s] @ X[s] = Y[s]`` at once.

    ``A`` is ``S x rows x k`` and ``Y`` is ``S x rows x L``. Returns ``(X, ok)``
    where ``X`` is ``S x k x L`` and ``ok[s]`` is False when ``A[s]`` has rank
    below ``k`` (that ``X[s]`` is meaningless).
    """
    F = F or field_for()
    A = np.asarray(A, dtype=F.dtype)
    S, rows, k = A.shape
    aug = np.concatenate([A, np.asarray(Y, dtype=F.dtype).reshape(S, rows, -1)], axis=2)
    ok = np.full(S, rows >= k)
    idx = np.arange(S)
    for c in range(min(k, rows)):
        nz = aug[:, c:, c] != 0
        ok &= nz.any(axis=1)
        p = c + nz.argmax(axis=1)
        top = aug[idx, c].copy()
        aug[idx, c] = aug[idx, p]
        aug[idx, p] = top
        piv = aug[:, c, c]
        # Rank-deficient systems have a zero pivot here; scale them by 0.
        inv = np.zeros_like(piv)
        inv[piv != 0] = F.vinv(piv[piv != 0])
        aug[:, c] = F.vmul(inv[:, None], aug[:, c])
        f = aug[:, :, c].copy()
        f[:, c] = 0
        aug ^= F.vmul(f[:, :, None], aug[:, c][:, None, :])
    return aug[:, :k, k:], ok


def cauchy_matrix(n: int, k: int, rng: np.random.Generator, F: GF | None = None) -> np.ndarray:
    """Random ``n x k`` Cauchy matrix ``1 / (x_i + y_j)``; MDS when ``n + k <= 2^m``."""
    F = F or field_for()
    if n + k > F.order:
        raise CodecError(f"field GF(2^{F.m}) too small for a {n}x{k} MDS matrix")
    pts = rng.permutation(F.order)[: n + k]
    x, y = pts[:n], pts[n:]
    return F.vinv((x[:, None] ^ y[None, :]).astype(F.dtype))


def make_coefficients(params: GenerationParams, rng: np.random.Generator,
                      F: GF | None = None) -> np.ndarray:
    """Draw an ``n x k`` coefficient matrix with every ``k x k`` minor invertible."""
    F = F or field_for()
    n, k = params.n, params.k
    if math.comb(n, k) > VERIFY_LIMIT:
        return cauchy_matrix(n, k, rng, F)
    for _ in range(MAX_RETRIES):
        mat = rng.integers(0, F.order, size=(n, k)).astype(F.dtype)
        if all_subsets_invertible(mat, F):
            return mat
    raise CodecError(
        f"no any-{k}-of-{n} matrix over GF(2^{F.m}) after {MAX_RETRIES} draws"
    )


# -- encoder / decoder ---------------------------------------------------------

def encode_generation(source, vectors, generation_id: int = 0,
                      F: GF | None = None) -> list[CodedBlock]:
    """Coded payload ``j`` is ``sum_i vectors[j][i] * source[i]`` symbol-wise."""
    F = F or field_for()
    src = np.asarray(source, dtype=F.dtype)
    vec = np.asarray(vectors, dtype=F.dtype)
    if src.ndim != 2:
        raise CodecError("source must be k blocks of equal length")
    if vec.ndim != 2 or vec.shape[1] != src.shape[0]:
        raise CodecError(
            f"coding vectors of shape {vec.shape} do not match {src.shape[0]} source blocks"
        )
    payloads = np.bitwise_xor.reduce(F.vmul(vec[:, :, None], src[None, :, :]), axis=1)
    return [CodedBlock(generation_id, vec[j].copy(), payloads[j]) for j in range(vec.shape[0])]


@dataclass(eq=False)
class DecodeState:
    """Incremental Gauss-Jordan decoder for one generation.

    Accepted rows are kept in reduced row-echelon form over ``[vector | payload]``
    so each ingest costs a constant number of vectorised row operations.
    """

    generation_id: int
    k: int
    F: GF = field(default_factory=field_for)
    received: list[CodedBlock] = field(default_factory=list)
    _rows: np.ndarray | None = field(default=None, repr=False)
    _pivots: list[int] = field(default_factory=list, repr=False)

    @property
    def rank(self) -> int:
        return len(self._pivots)

    @property
    def decodable(self) -> bool:
        return self.rank == self.k

    def ingest(self, block: CodedBlock) -> "DecodeState":
        if block.generation_id != self.generation_id:
            raise CodecError(
                f"block of generation {block.generation_id} fed to decoder "
                f"of generation {self.generation_id}"
            )
        if len(block.vector) != self.k:
            raise CodecError(f"coding vector length {len(block.vector)} != k={self.k}")
        if self.decodable:
            return self
        F = self.F
        row = np.concatenate([np.asarray(block.vector, dtype=F.dtype),
                              np.asarray(block.payload, dtype=F.dtype)])
        if self._rows is None:
            self._rows = np.zeros((0, row.size), dtype=F.dtype)
        elif row.size != self._rows.shape[1]:
            raise CodecError("payload length differs from earlier blocks")
        if self._pivots:
            row ^= _xor_rows(F, row[self._pivots], self._rows)
        nz = np.flatnonzero(row[: self.k])
        if nz.size == 0:
            return self  # linearly dependent, dropped
        piv = int(nz[0])
        row = F.vmul(F.inv(int(row[piv])), row)
        if self._pivots:
            self._rows ^= F.vmul(self._rows[:, piv][:, None], row[None, :])
        self._rows = np.vstack([self._rows, row])
        self._pivots.append(piv)
        self.received.append(block)
        return self

    def candidate_count(self, block_len: int) -> int:
        """Number of source generations consistent with what was received."""
        return self.F.order ** (block_len * (self.k - self.rank))


def ingest(state: DecodeState, block: CodedBlock) -> DecodeState:
    return state.ingest(block)


def decode_generation(state: DecodeState) -> np.ndarray:
    """Return the ``k x L`` source blocks in lane order."""
    if not state.decodable:
        raise InsufficientRankError(state.rank, state.k)
    order = np.argsort(state._pivots)
    return state._rows[order, state.k:].copy()


def decode_blocks(blocks: Iterable[CodedBlock], k: int, F: GF | None = None) -> np.ndarray:
    """One-shot decode of a batch of coded blocks from a single generation."""
    blocks = list(blocks)
    if not blocks:
        raise InsufficientRankError(0, k)
    if len({b.generation_id for b in blocks}) > 1:
        raise CodecError("blocks from different generations cannot be decoded together")
    A = np.stack([b.vector for b in blocks])
    if A.shape[1] != k:
        raise CodecError(f"coding vector length {A.shape[1]} != k={k}")
    return solve(A, np.stack([b.payload for b in blocks]), F)


def decode_subsets(blocks: Sequence[CodedBlock], subsets, k: int,
                   F: GF | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Decode one generation from each of several equally sized block subsets.

    ``subsets`` is an ``S x j`` array of indices into ``blocks``. Useful for
    checking every erasure pattern at once; returns ``(X, ok)`` as
    :func:`solve_batch` does.
    """
    subsets = np.asarray(subsets, dtype=np.int64)
    if subsets.ndim != 2:
        raise CodecError("subsets must be a 2-D index array")
    if len({b.generation_id for b in blocks}) > 1:
        raise CodecError("blocks from different generations cannot be decoded together")
    vec = np.stack([b.vector for b in blocks])
    pay = np.stack([b.payload for b in blocks])
    if vec.shape[1] != k:
        raise CodecError(f"coding vector length {vec.shape[1]} != k={k}")
    return solve_batch(vec[subsets], pay[subsets], F)


class Encoder:
    """Encodes a block stream generation by generation with fresh coefficients."""

    def __init__(self, params: GenerationParams, rng: np.random.Generator,
                 spec: FieldSpec = FieldSpec()):
        self.params = params
        self.rng = rng
        self.F = field_for(spec)

    def encode(self, stream: Sequence[np.ndarray]) -> tuple[list[list[CodedBlock]], int]:
        gens, count = split_generations(stream, self.params.k)
        coded = []
        for g, src in enumerate(gens):
            vecs = make_coefficients(self.params, self.rng, self.F)
            coded.append(encode_generation(src, vecs, g, self.F))
        return coded, count


def decode_stream(coded: Sequence[Sequence[CodedBlock]], k: int, count: int,
                  spec: FieldSpec = FieldSpec()) -> list[np.ndarray]:
    """Decode every generation and re-serialize; raises on any rank-deficient one."""
    F = field_for(spec)
    gens = [decode_blocks(blocks, k, F) for blocks in coded]
    return join_generations(gens, count)
