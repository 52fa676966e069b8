"""Finite-alphabet primitives: distributions, channels, and empirical types.

Symbols are integers 0..k-1. All information quantities are in bits
(base-2 logs) and 0 log 0 is taken as 0 throughout.
"""

from __future__ import annotations

import math
from typing import Iterable, Iterator, Sequence

import numpy as np

SIMPLEX_TOL = 1e-12

# Refuse to materialize type classes beyond this many sequences.
ENUMERATION_GUARD = 10_000_000


class InputDistribution:
    """A probability vector over an input alphabet of size >= 2.

    Wraps a 1-D float array, validated to lie on the simplex within
    SIMPLEX_TOL and renormalized so downstream arithmetic sees an exact
    unit sum.
    """

    __slots__ = ("p",)

    def __init__(self, probs: Sequence[float] | np.ndarray):
        p = np.asarray(probs, dtype=float)
        if p.ndim != 1 or p.size < 2:
            raise ValueError("input distribution needs a 1-D vector over at least 2 symbols")
        if np.any(p < -SIMPLEX_TOL):
            raise ValueError(f"negative mass in {p!r}")
        total = float(p.sum())
        if abs(total - 1.0) > SIMPLEX_TOL:
            raise ValueError(f"probabilities sum to {total!r}, not 1")
        p = np.clip(p, 0.0, None)
        self.p = p / p.sum()

    @property
    def size(self) -> int:
        return int(self.p.size)

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.p > 0.0)

    def __repr__(self) -> str:
        return f"InputDistribution({self.p.tolist()!r})"


class ChannelMatrix:
    """A row-stochastic |X| x |Y| matrix of conditional probabilities."""

    __slots__ = ("w",)

    def __init__(self, rows: Sequence[Sequence[float]] | np.ndarray):
        w = np.asarray(rows, dtype=float)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise ValueError("channel matrix must be 2-D and non-empty")
        if np.any(w < -SIMPLEX_TOL):
            raise ValueError("negative entry in channel matrix")
        sums = w.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise ValueError(f"rows must each sum to 1, got sums {sums.tolist()!r}")
        w = np.clip(w, 0.0, None)
        self.w = w / w.sum(axis=1, keepdims=True)

    @property
    def num_inputs(self) -> int:
        return int(self.w.shape[0])

    @property
    def num_outputs(self) -> int:
        return int(self.w.shape[1])

    def output_distribution(self, P: "InputDistribution | np.ndarray") -> np.ndarray:
        p = P.p if isinstance(P, InputDistribution) else np.asarray(P, dtype=float)
        return p @ self.w

    def __repr__(self) -> str:
        return f"ChannelMatrix({self.w.tolist()!r})"


class EmpiricalType:
    """Symbol counts of a finite sequence, kept alongside its length."""

    __slots__ = ("counts", "length")

    def __init__(self, counts: Sequence[int] | np.ndarray):
        c = np.asarray(counts, dtype=np.int64)
        if c.ndim != 1 or np.any(c < 0):
            raise ValueError("counts must be a 1-D vector of nonnegative integers")
        self.counts = c
        self.length = int(c.sum())

    @classmethod
    def from_sequence(cls, seq: Sequence[int] | np.ndarray, alphabet_size: int) -> "EmpiricalType":
        arr = np.asarray(seq, dtype=np.int64)
        if arr.size and (arr.min() < 0 or arr.max() >= alphabet_size):
            raise ValueError("sequence contains symbols outside the alphabet")
        return cls(np.bincount(arr, minlength=alphabet_size))

    def frequencies(self) -> np.ndarray:
        if self.length == 0:
            raise ValueError("empty sequence has no frequency vector")
        return self.counts / self.length

    def __repr__(self) -> str:
        return f"EmpiricalType({self.counts.tolist()!r})"


class JointType:
    """Joint symbol counts of a pair of aligned sequences."""

    __slots__ = ("counts", "length")

    def __init__(self, counts: Sequence[Sequence[int]] | np.ndarray):
        c = np.asarray(counts, dtype=np.int64)
        if c.ndim != 2 or np.any(c < 0):
            raise ValueError("joint counts must be a 2-D array of nonnegative integers")
        self.counts = c
        self.length = int(c.sum())

    def frequencies(self) -> np.ndarray:
        if self.length == 0:
            raise ValueError("empty pair has no frequency matrix")
        return self.counts / self.length

    def x_marginal(self) -> EmpiricalType:
        return EmpiricalType(self.counts.sum(axis=1))

    def y_marginal(self) -> EmpiricalType:
        return EmpiricalType(self.counts.sum(axis=0))

    def __repr__(self) -> str:
        return f"JointType({self.counts.tolist()!r})"


def joint_type(
    x_seq: Sequence[int] | np.ndarray,
    y_seq: Sequence[int] | np.ndarray,
    num_inputs: int,
    num_outputs: int,
) -> JointType:
    """Count joint occurrences of (x_t, y_t) over aligned sequences."""
    x = np.asarray(x_seq, dtype=np.int64)
    y = np.asarray(y_seq, dtype=np.int64)
    if x.shape != y.shape:
        raise ValueError("sequences must have equal length")
    if x.size and (x.min() < 0 or x.max() >= num_inputs):
        raise ValueError("x sequence leaves its alphabet")
    if y.size and (y.min() < 0 or y.max() >= num_outputs):
        raise ValueError("y sequence leaves its alphabet")
    flat = np.bincount(x * num_outputs + y, minlength=num_inputs * num_outputs)
    return JointType(flat.reshape(num_inputs, num_outputs))


# ---------------------------------------------------------------------------
# information measures
# ---------------------------------------------------------------------------


def binary_entropy(t: float) -> float:
    """h(t) = -t log2 t - (1-t) log2 (1-t), with h(0) = h(1) = 0."""
    if t < 0.0 or t > 1.0:
        raise ValueError(f"argument {t!r} outside [0, 1]")
    if t == 0.0 or t == 1.0:
        return 0.0
    return float(-t * math.log2(t) - (1.0 - t) * math.log2(1.0 - t))


def entropy(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=float)
    mask = p > 0.0
    return float(-np.sum(p[mask] * np.log2(p[mask])))


def mutual_information(
    P: InputDistribution | np.ndarray, V: ChannelMatrix | np.ndarray
) -> float:
    """I(P, V) in bits for input distribution P and channel matrix V.

    Computed as the KL-style double sum with zero terms dropped, so rows
    of V outside the support of P never contribute, and exact zeros in V
    are safe.
    """
    p = P.p if isinstance(P, InputDistribution) else np.asarray(P, dtype=float)
    w = V.w if isinstance(V, ChannelMatrix) else np.asarray(V, dtype=float)
    if p.shape[0] != w.shape[0]:
        raise ValueError("P and V disagree on the input alphabet size")
    out = p @ w
    joint = p[:, None] * w
    xs, ys = np.nonzero(joint > 0.0)
    # out[y] >= joint[x, y] entrywise, so out is positive wherever joint is.
    val = float(np.sum(joint[xs, ys] * np.log2(w[xs, ys] / out[ys])))
    return max(val, 0.0)


def log2_int(n: int) -> float:
    """log2 of a positive integer, safe for values beyond float range."""
    if n <= 0:
        raise ValueError("argument must be positive")
    bits = n.bit_length()
    if bits <= 900:
        return math.log2(n)
    shift = bits - 64
    return shift + math.log2(n >> shift)


def variational_distance(q1: np.ndarray, q2: np.ndarray) -> float:
    """Total variation distance, half the L1 norm, in [0, 1] for distributions."""
    a = np.asarray(q1, dtype=float)
    b = np.asarray(q2, dtype=float)
    if a.shape != b.shape:
        raise ValueError("distributions must have the same shape")
    return float(0.5 * np.abs(a - b).sum())


def empirical_mutual_information(joint) -> float:
    """Plug-in mutual information of a joint frequency matrix, in bits."""
    J = joint.frequencies() if isinstance(joint, JointType) else np.asarray(joint, dtype=float)
    total = J.sum()
    if total <= 0.0:
        raise ValueError("empty joint distribution")
    J = J / total
    rows = J.sum(axis=1)
    cols = J.sum(axis=0)
    xs, ys = np.nonzero(J > 0.0)
    val = float(np.sum(J[xs, ys] * np.log2(J[xs, ys] / (rows[xs] * cols[ys]))))
    return max(val, 0.0)


# ---------------------------------------------------------------------------
# type classes
# ---------------------------------------------------------------------------


def type_class_size(counts: Sequence[int] | np.ndarray) -> int:
    """Number of sequences with the given symbol counts (exact multinomial)."""
    c = [int(v) for v in counts]
    if any(v < 0 for v in c):
        raise ValueError("negative count")
    n = sum(c)
    size = math.factorial(n)
    for v in c:
        size //= math.factorial(v)
    return size


def type_class_enumerate(counts: Sequence[int] | np.ndarray) -> list[np.ndarray]:
    """All distinct sequences with the given symbol counts, lexicographic order.

    Guarded: raises if the class holds more than ENUMERATION_GUARD sequences.
    """
    c = [int(v) for v in counts]
    size = type_class_size(c)
    if size > ENUMERATION_GUARD:
        raise ValueError(f"type class has {size} sequences, above the enumeration guard")
    n = sum(c)
    out: list[np.ndarray] = []
    seq = np.empty(n, dtype=np.int64)

    def fill(pos: int, remaining: list[int]) -> None:
        if pos == n:
            out.append(seq.copy())
            return
        for sym, left in enumerate(remaining):
            if left:
                remaining[sym] -= 1
                seq[pos] = sym
                fill(pos + 1, remaining)
                remaining[sym] += 1

    fill(0, c)
    return out


def type_class_sample(counts: Sequence[int] | np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One sequence drawn uniformly from the type class.

    A uniform permutation of the multiset is uniform over distinct
    arrangements, so a single shuffle suffices.
    """
    c = np.asarray(counts, dtype=np.int64)
    base = np.repeat(np.arange(c.size, dtype=np.int64), c)
    return rng.permutation(base)


def iter_compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Yield all tuples of `parts` nonnegative integers summing to `total`."""
    if parts <= 0:
        raise ValueError("need at least one part")
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for tail in iter_compositions(total - head, parts - 1):
            yield (head,) + tail
