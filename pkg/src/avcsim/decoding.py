"""Decoders and decode-time rules for chunked sessions.

Three layers: a maximum empirical-MI decoder over whole codewords, a
per-chunk shell list decoder driven by channel-set side information, and
the two threshold rules that decide after which chunk a session fires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .alphabet import (
    ChannelMatrix,
    empirical_mutual_information,
    joint_type,
    log2_int,
    mutual_information,
    type_class_enumerate,
    variational_distance,
)
from .avc import Avc
from .capacity import CachedStdMin, min_mi_std, min_mi_std_restricted
from .codebook import ChunkedCodebook

# mmi_decode walks every message; past this we insist the caller use the
# sampled session path instead of silently burning hours.
MMI_ENUMERATION_CAP = 1 << 20


@dataclass(frozen=True)
class DecodeOutcome:
    """Result of a decode attempt.

    kind is "message" (single estimate), "list" (candidates, ascending
    and duplicate-free), or "undecided". `empty_csi_chunks` records chunk
    indices whose filtered side-information set was empty.
    """

    kind: str
    message: int | None = None
    candidates: tuple[int, ...] = ()
    empty_csi_chunks: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("message", "list", "undecided"):
            raise ValueError(f"unknown outcome kind {self.kind!r}")
        if self.kind == "message" and self.message is None:
            raise ValueError("message outcome needs a message index")
        if list(self.candidates) != sorted(set(self.candidates)):
            raise ValueError("candidate list must be ascending and duplicate-free")


# ---------------------------------------------------------------------------
# maximum empirical-MI decoding
# ---------------------------------------------------------------------------


def mmi_decode(cb: ChunkedCodebook, y_seq: Sequence[int] | np.ndarray, num_outputs: int) -> DecodeOutcome:
    """Pick the message whose codeword has the largest plug-in MI with y.

    Exhaustive over all messages; scores within 1e-12 count as tied and
    ties resolve to the smallest index, so mathematically equal scores
    computed along different float paths cannot flip the winner.
    """
    y = np.asarray(y_seq, dtype=np.int64)
    if y.size != cb.block_length:
        raise ValueError(f"output length {y.size} != active block length {cb.block_length}")
    if cb.N > MMI_ENUMERATION_CAP:
        raise ValueError(
            "message count too large for exhaustive scoring; use the sampled session path"
        )
    best_idx, best_score = 0, -1.0
    for i in range(cb.N):
        jt = joint_type(cb.codeword(i), y, cb.num_symbols, num_outputs)
        score = empirical_mutual_information(jt)
        if score > best_score + 1e-12:
            best_idx, best_score = i, score
    return DecodeOutcome(kind="message", message=best_idx)


# ---------------------------------------------------------------------------
# chunk-level shell lists from channel-set side information
# ---------------------------------------------------------------------------


def filter_csi(
    y_chunk: Sequence[int] | np.ndarray,
    csi_set: Sequence[ChannelMatrix],
    P: np.ndarray,
    delta: float,
    num_outputs: int,
) -> list[ChannelMatrix]:
    """Keep channels whose predicted output law sits strictly within
    total variation delta of the observed chunk output type."""
    y = np.asarray(y_chunk, dtype=np.int64)
    y_freq = np.bincount(y, minlength=num_outputs) / y.size
    kept = []
    for V in csi_set:
        if variational_distance(y_freq, np.asarray(P) @ V.w) < delta:
            kept.append(V)
    return kept


def chunk_mi_min(P: np.ndarray, channels: Sequence[ChannelMatrix]) -> float | None:
    """Smallest I(P, V) over a filtered channel set; None when empty."""
    if not channels:
        return None
    return min(mutual_information(np.asarray(P), V) for V in channels)


_SHELL_CACHE: dict[tuple[int, ...], list[np.ndarray]] = {}


def _chunk_class(composition: Sequence[int] | np.ndarray) -> list[np.ndarray]:
    key = tuple(int(v) for v in composition)
    members = _SHELL_CACHE.get(key)
    if members is None:
        members = type_class_enumerate(np.asarray(key))
        _SHELL_CACHE[key] = members
    return members


def chunk_list_decode(
    composition: Sequence[int] | np.ndarray,
    y_chunk: Sequence[int] | np.ndarray,
    csi_set: Sequence[ChannelMatrix],
    delta: float,
    xi: float,
    num_outputs: int,
) -> tuple[list[np.ndarray], bool]:
    """Shell list for one chunk: type-class members whose joint type with
    y is close to P x V for some filtered channel V.

    Returns (members, csi_empty). The shell radius is (|X| + 1) * xi in
    total variation. An empty filtered set yields an empty list with the
    flag raised; the threshold rules treat such chunks as uninformative
    rather than as evidence.
    """
    comp = np.asarray(composition, dtype=np.int64)
    c = int(comp.sum())
    y = np.asarray(y_chunk, dtype=np.int64)
    if y.size != c:
        raise ValueError("chunk length mismatch")
    P = comp / c
    filtered = filter_csi(y, csi_set, P, delta, num_outputs)
    if not filtered:
        return [], True
    radius = (comp.size + 1) * xi
    targets = [np.asarray(P)[:, None] * V.w for V in filtered]
    members = []
    for x in _chunk_class(comp):
        J = joint_type(x, y, comp.size, num_outputs).frequencies()
        for T in targets:
            if 0.5 * float(np.abs(J - T).sum()) <= radius + 1e-12:
                members.append(x)
                break
    return members, False


def concat_list_decode(
    cb: ChunkedCodebook,
    y_seq: Sequence[int] | np.ndarray,
    csi_stream: Sequence[Sequence[ChannelMatrix]],
    delta: float,
    xi: float,
    num_outputs: int,
) -> DecodeOutcome:
    """Messages whose every chunk lies in that chunk's shell list.

    With one chunk this is exactly the chunk list intersected with the
    codebook. Chunks with empty filtered sets admit no survivors, so the
    outcome is an empty list with those chunks flagged.
    """
    y = np.asarray(y_seq, dtype=np.int64)
    M, c = cb.M, cb.c
    if y.size != M * c:
        raise ValueError("output length does not match the active block length")
    if len(csi_stream) < M:
        raise ValueError("side-information stream shorter than the block")
    if cb.N > MMI_ENUMERATION_CAP:
        raise ValueError("message count too large for exhaustive listing")
    empty_chunks: list[int] = []
    shells: list[set[bytes] | None] = []
    for m in range(M):
        members, empty = chunk_list_decode(
            cb.composition, y[m * c : (m + 1) * c], csi_stream[m], delta, xi, num_outputs
        )
        if empty:
            empty_chunks.append(m)
            shells.append(None)
        else:
            shells.append({member.tobytes() for member in members})
    survivors = []
    if not empty_chunks:
        for i in range(cb.N):
            word = np.asarray(cb.codeword(i), dtype=np.int64)
            ok = True
            for m in range(M):
                if word[m * c : (m + 1) * c].tobytes() not in shells[m]:
                    ok = False
                    break
            if ok:
                survivors.append(i)
    return DecodeOutcome(
        kind="list", candidates=tuple(survivors), empty_csi_chunks=tuple(empty_chunks)
    )


# ---------------------------------------------------------------------------
# decode-time threshold rules
# ---------------------------------------------------------------------------


def tau_std(
    m: int,
    N: int,
    c: int,
    csi_costs: Sequence[float],
    P: np.ndarray,
    avc: Avc,
    delta: float,
    min_cache: CachedStdMin | None = None,
    output_consistency: bool = False,
    y_seq: Sequence[int] | np.ndarray | None = None,
    delta_out: float = 0.1,
) -> bool:
    """Input-blind firing rule after chunk m.

    Fires when the running rate log2(N)/(m c) drops strictly below the
    hull minimum at the averaged cost estimate, minus the margin delta.
    With `output_consistency` the minimum is further restricted to mixes
    matching the observed output type within delta_out; an empty
    restriction makes the observation implausible under every admissible
    mix and the rule fires.
    """
    if m < 1:
        raise ValueError("chunk count must be positive")
    if len(csi_costs) < m:
        raise ValueError("fewer cost estimates than chunks")
    lam_hat = float(np.mean(np.asarray(csi_costs[:m], dtype=float)))
    rate = log2_int(N) / (m * c)
    if output_consistency:
        if y_seq is None:
            raise ValueError("output-consistency mode needs the observed outputs")
        y = np.asarray(y_seq, dtype=np.int64)[: m * c]
        y_freq = np.bincount(y, minlength=avc.num_outputs) / y.size
        value, _ = min_mi_std_restricted(avc, np.asarray(P), lam_hat, y_freq, delta_out)
        if math.isinf(value):
            return True
        return rate < value - delta
    if min_cache is not None:
        value = min_cache.value(lam_hat)
    else:
        value = min_mi_std(avc, np.asarray(P), lam_hat)[0]
    return rate < value - delta


def tau_dep(
    m: int,
    N: int,
    c: int,
    chunk_mi_mins: Sequence[float | None],
    eps: float,
) -> bool:
    """Input-aware firing rule after chunk m.

    Averages the per-chunk filtered-set minima, counting chunks with
    empty filtered sets as zero, and fires when the running rate drops
    strictly below that average minus eps.
    """
    if m < 1:
        raise ValueError("chunk count must be positive")
    if len(chunk_mi_mins) < m:
        raise ValueError("fewer per-chunk minima than chunks")
    avg = sum(0.0 if v is None else float(v) for v in chunk_mi_mins[:m]) / m
    return log2_int(N) / (m * c) < avg - eps
