"""Chunked constant-composition codebooks.

A codeword is a row of M chunks, each chunk drawn independently and
uniformly from the type class of a fixed composition over the input
alphabet. Codewords are indexed by message number and derived
deterministically from (seed, key, index), so a codebook can either be
materialized as a table or left virtual and sampled on demand; both
modes produce bit-identical codewords. Truncating to fewer chunks is a
prefix operation, which is what lets a receiver decode early.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from .alphabet import type_class_sample, type_class_size

# Above this message count the table form is refused and codewords are
# always derived on demand.
MATERIALIZE_CAP = 1 << 24

# Soft bound on total table entries so small-N, long-block codebooks do
# not balloon memory.
_TABLE_ENTRY_CAP = 1 << 26

_CODEWORD_STREAM = 0x10C0DE


def _index_limbs(i: int) -> tuple[int, ...]:
    """Split a nonnegative (possibly huge) index into 32-bit limbs."""
    if i < 0:
        raise ValueError("message index must be nonnegative")
    if i == 0:
        return (0,)
    limbs = []
    while i:
        limbs.append(i & 0xFFFFFFFF)
        i >>= 32
    return tuple(limbs)


class ChunkedCodebook:
    """Constant-composition codebook with per-message derivable codewords.

    `M_hi` is the full chunk count laid down at build time; `M_lo` is the
    earliest truncation a session may decode at. The active length `M`
    starts at `M_hi` and is narrowed by `truncate`.
    """

    def __init__(
        self,
        composition: Sequence[int] | np.ndarray,
        M_hi: int,
        N: int,
        seed: int,
        key: int = 0,
        M_lo: int = 1,
        table: np.ndarray | None = None,
        M: int | None = None,
    ):
        comp = np.asarray(composition, dtype=np.int64)
        if comp.ndim != 1 or comp.size < 2 or np.any(comp < 0) or comp.sum() < 1:
            raise ValueError("composition must be nonnegative counts over >= 2 symbols")
        if M_hi < 1 or N < 1:
            raise ValueError("need at least one chunk and one message")
        if not (1 <= M_lo <= M_hi):
            raise ValueError("chunk-count floor must lie in [1, M_hi]")
        self.composition = comp
        self.c = int(comp.sum())
        self.M_hi = int(M_hi)
        self.M_lo = int(M_lo)
        self.N = int(N)
        self.seed = int(seed)
        self.key = int(key)
        self.M = int(M if M is not None else M_hi)
        if not (1 <= self.M <= self.M_hi):
            raise ValueError("active chunk count out of range")
        self._table = table
        self._cache: dict[int, np.ndarray] = {}

    @property
    def num_symbols(self) -> int:
        return int(self.composition.size)

    @property
    def block_length(self) -> int:
        return self.M * self.c

    @property
    def materialized(self) -> bool:
        return self._table is not None

    def chunk_class_size(self) -> int:
        return type_class_size(self.composition)

    def _derive(self, index: int) -> np.ndarray:
        ss = np.random.SeedSequence(
            self.seed, spawn_key=(_CODEWORD_STREAM, self.key) + _index_limbs(index)
        )
        rng = np.random.Generator(np.random.PCG64(ss))
        chunks = [type_class_sample(self.composition, rng) for _ in range(self.M_hi)]
        word = np.concatenate(chunks).astype(np.int8)
        word.flags.writeable = False
        return word

    def codeword(self, index: int) -> np.ndarray:
        """The codeword for a message, truncated to the active length."""
        if not (0 <= index < self.N):
            raise ValueError(f"message index {index} outside [0, {self.N})")
        if self._table is not None:
            return self._table[index, : self.block_length]
        word = self._cache.get(index)
        if word is None:
            word = self._derive(index)
            if len(self._cache) > 128:
                self._cache.clear()
            self._cache[index] = word
        return word[: self.block_length]

    def chunk(self, index: int, m: int) -> np.ndarray:
        if not (0 <= m < self.M):
            raise ValueError("chunk index outside the active length")
        return self.codeword(index)[m * self.c : (m + 1) * self.c]

    def __repr__(self) -> str:
        mode = "table" if self.materialized else "virtual"
        return (
            f"ChunkedCodebook(comp={self.composition.tolist()}, M={self.M}/{self.M_hi}, "
            f"N={self.N}, key={self.key}, {mode})"
        )


def build_chunked(
    composition: Sequence[int] | np.ndarray,
    M_hi: int,
    N: int,
    seed: int,
    key: int = 0,
    M_lo: int = 1,
    materialize: bool | None = None,
) -> ChunkedCodebook:
    """Draw a codebook of N messages with iid uniform type-class chunks.

    With `materialize` unset, small books are stored as a table and large
    ones stay virtual; either way `codeword(i)` is identical.
    """
    cb = ChunkedCodebook(composition, M_hi, N, seed, key=key, M_lo=M_lo)
    if materialize is None:
        materialize = N <= MATERIALIZE_CAP and N * M_hi * cb.c <= _TABLE_ENTRY_CAP
    if materialize:
        if N > MATERIALIZE_CAP:
            raise ValueError(f"refusing to materialize {N} codewords")
        table = np.vstack([cb._derive(i) for i in range(N)])
        table.flags.writeable = False
        cb._table = table
    return cb


def permute_messages(cb: ChunkedCodebook, seed: int) -> ChunkedCodebook:
    """Relabel messages by a uniform permutation.

    Averaging over the relabeling turns a bound on the average error into
    one on the worst message, so families use it after selection. The
    multiset of codewords is untouched. Only table-backed books can be
    permuted; virtual books are already exchangeable by construction.
    """
    if cb._table is None:
        raise ValueError("cannot permute a virtual codebook; materialize it first")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    perm = rng.permutation(cb.N)
    table = cb._table[perm]
    table.flags.writeable = False
    return ChunkedCodebook(
        cb.composition, cb.M_hi, cb.N, cb.seed, key=cb.key, M_lo=cb.M_lo, table=table, M=cb.M
    )


def truncate(cb: ChunkedCodebook, M: int) -> ChunkedCodebook:
    """Narrow the active length to M chunks; codewords become prefixes."""
    if not (cb.M_lo <= M <= cb.M_hi):
        raise ValueError(f"M={M} outside [{cb.M_lo}, {cb.M_hi}]")
    return ChunkedCodebook(
        cb.composition,
        cb.M_hi,
        cb.N,
        cb.seed,
        key=cb.key,
        M_lo=cb.M_lo,
        table=cb._table,
        M=M,
    )


def subsample_for_constant_list(
    cb: ChunkedCodebook, count: int, seed: int
) -> tuple[ChunkedCodebook, np.ndarray]:
    """Keep a uniform subset of messages, re-indexed 0..count-1.

    Subsampling does not change the per-codeword law, so any guarantee
    holding on the full draw holds on the subset; the point of shrinking
    is to certify a constant list size a posteriori. Returns the smaller
    book plus the original index of each kept message.
    """
    if not (1 <= count <= cb.N):
        raise ValueError("subset size out of range")
    if cb._table is None:
        raise ValueError("cannot subsample a virtual codebook; materialize it first")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    keep = np.sort(rng.choice(cb.N, size=count, replace=False))
    table = cb._table[keep]
    table.flags.writeable = False
    sub = ChunkedCodebook(
        cb.composition, cb.M_hi, count, cb.seed, key=cb.key, M_lo=min(cb.M_lo, cb.M_hi),
        table=table, M=cb.M,
    )
    return sub, keep


@dataclass(frozen=True)
class KeyedCodebookFamily:
    """K codebooks sharing every parameter except the key index."""

    composition: tuple[int, ...]
    M_hi: int
    N: int
    seed: int
    K: int
    M_lo: int = 1

    def __post_init__(self) -> None:
        if self.K < 1:
            raise ValueError("family needs at least one key")

    def member(self, key: int, materialize: bool | None = None) -> ChunkedCodebook:
        if not (0 <= key < self.K):
            raise ValueError(f"key {key} outside [0, {self.K})")
        return build_chunked(
            np.asarray(self.composition),
            self.M_hi,
            self.N,
            self.seed,
            key=key,
            M_lo=self.M_lo,
            materialize=materialize,
        )


# ---------------------------------------------------------------------------
# block-length bookkeeping
# ---------------------------------------------------------------------------


def scaling_params(n: int, R_min: float, R_max: float) -> tuple[int, int, int, int]:
    """Chunk size and message-count schedule for block length n.

    Returns (c, M_hi, M_lo, N): the chunk length (fourth root of n,
    snapped to the nearest divisor of n), the chunk count, the earliest
    decodable chunk count ceil((R_min/R_max) M_hi), and the message count
    ceil(2^(n R_min)), exact even when it exceeds float range.
    """
    if n < 16:
        raise ValueError("block length must be at least 16")
    if not (0.0 < R_min <= R_max):
        raise ValueError("need 0 < R_min <= R_max")
    target = n ** 0.25
    divisors = [d for d in range(1, n + 1) if n % d == 0]
    c = min(divisors, key=lambda d: (abs(d - target), -d))
    M_hi = n // c
    M_lo = math.ceil((R_min / R_max) * M_hi)
    N = _ceil_exp2(n * R_min)
    return c, M_hi, M_lo, max(N, 2)


def _ceil_exp2(bits: float) -> int:
    """ceil(2^bits) as an exact integer for arbitrary nonnegative bits."""
    if bits < 0:
        raise ValueError("exponent must be nonnegative")
    whole = int(bits)
    frac = bits - whole
    if frac == 0.0:
        return 1 << whole
    mantissa = Fraction(2.0 ** frac)
    value = mantissa * (1 << whole)
    return int(math.ceil(value))


def pairwise_collision_prob(composition: Sequence[int] | np.ndarray, M: int) -> float:
    """Probability two independent codewords agree on all M chunks."""
    return float(type_class_size(composition)) ** (-M)


# ---------------------------------------------------------------------------
# cache files
# ---------------------------------------------------------------------------


def save_codebook(cb: ChunkedCodebook, path: str | Path) -> None:
    """Write header (and the table when materialized) to an .npz file."""
    header = {
        "composition": cb.composition.tolist(),
        "c": cb.c,
        "M_hi": cb.M_hi,
        "M_lo": cb.M_lo,
        "N": str(cb.N),  # may exceed any fixed-width integer
        "seed": cb.seed,
        "key": cb.key,
        "M": cb.M,
    }
    arrays = {"header": np.frombuffer(json.dumps(header).encode(), dtype=np.uint8)}
    if cb._table is not None:
        arrays["table"] = cb._table
    np.savez(path, **arrays)


def load_codebook(path: str | Path) -> ChunkedCodebook:
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode())
        table = data["table"].copy() if "table" in data.files else None
    if table is not None:
        table.flags.writeable = False
    return ChunkedCodebook(
        header["composition"],
        header["M_hi"],
        int(header["N"]),
        header["seed"],
        key=header["key"],
        M_lo=header["M_lo"],
        table=table,
        M=header["M"],
    )
