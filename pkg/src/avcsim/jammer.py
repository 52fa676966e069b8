"""State-sequence adversaries and the side information they leak.

Strategies produce admissible state sequences, clipping overspend from
the sequence end by swapping in the cheapest state. Side information
comes in two shapes: quantized per-chunk cost estimates, and small sets
of candidate chunk channels containing the true per-input average.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .alphabet import ChannelMatrix, iter_compositions, mutual_information, variational_distance
from .avc import Avc, admissible, induced_channel_q, state_cost
from .capacity import min_mi_dep, min_mi_std

STRATEGY_KINDS = ("fixed_sequence", "iid_mixture", "memoryless_dependent", "greedy_dependent")


@dataclass(frozen=True)
class JammerStrategy:
    """A named state-selection rule plus its parameters.

    fixed_sequence replays `sequence`. iid_mixture draws states from
    `mixture`. memoryless_dependent draws s_t from kernel row x_t and
    needs the transmitted sequence, as does greedy_dependent, which
    steers each output row toward a target output law under the
    remaining budget.
    """

    kind: str
    sequence: tuple[int, ...] | None = None
    mixture: tuple[float, ...] | None = None
    kernel: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.kind == "fixed_sequence" and self.sequence is None:
            raise ValueError("fixed_sequence needs its sequence")
        if self.kind == "iid_mixture" and self.mixture is None:
            raise ValueError("iid_mixture needs a state distribution")
        if self.kind == "memoryless_dependent" and self.kernel is None:
            raise ValueError("memoryless_dependent needs a kernel")

    @property
    def input_aware(self) -> bool:
        return self.kind in ("memoryless_dependent", "greedy_dependent")


def worst_case_dependent_strategy(avc: Avc, P, Lambda: float) -> JammerStrategy:
    """Memoryless strategy built from the input-aware hull minimizer."""
    _, U = min_mi_dep(avc, P, Lambda)
    return JammerStrategy(
        kind="memoryless_dependent", kernel=tuple(tuple(row) for row in U.tolist())
    )


def _clip_from_end(avc: Avc, s: np.ndarray, Lambda: float) -> np.ndarray:
    """Replace states from the end with the cheapest one until admissible."""
    cheapest = int(np.argmin(avc.cost))
    budget = s.size * Lambda + 1e-12
    total = float(avc.cost[s].sum())
    t = s.size - 1
    while total > budget and t >= 0:
        total -= float(avc.cost[s[t]])
        s[t] = cheapest
        t -= 1
    return s


def jam(
    avc: Avc,
    strategy: JammerStrategy,
    x_seq: Sequence[int] | np.ndarray | None,
    n: int,
    Lambda: float,
    seed: int,
    P: np.ndarray | None = None,
) -> np.ndarray:
    """Produce an admissible length-n state sequence for the strategy.

    Input-aware strategies require x_seq; input-blind ones ignore it.
    The result always satisfies the budget, by validation for
    fixed_sequence and by end-clipping for the sampled strategies.
    """
    if Lambda < 0.0:
        raise ValueError("budget must be nonnegative")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))

    if strategy.kind == "fixed_sequence":
        s = np.asarray(strategy.sequence, dtype=np.int64)
        if s.size != n:
            raise ValueError("fixed sequence has the wrong length")
        if s.min() < 0 or s.max() >= avc.num_states:
            raise ValueError("fixed sequence leaves the state alphabet")
        if not admissible(avc, s, Lambda):
            raise ValueError("fixed sequence exceeds the budget")
        return s

    if strategy.kind == "iid_mixture":
        mix = np.asarray(strategy.mixture, dtype=float)
        if mix.shape != (avc.num_states,) or np.any(mix < 0) or abs(mix.sum() - 1.0) > 1e-9:
            raise ValueError("mixture is not a state distribution")
        s = rng.choice(avc.num_states, size=n, p=mix / mix.sum())
        return _clip_from_end(avc, s.astype(np.int64), Lambda)

    if x_seq is None:
        raise ValueError(f"{strategy.kind} needs the transmitted sequence")
    x = np.asarray(x_seq, dtype=np.int64)
    if x.size != n:
        raise ValueError("transmitted sequence has the wrong length")

    if strategy.kind == "memoryless_dependent":
        U = np.asarray(strategy.kernel, dtype=float)
        if U.shape != (avc.num_inputs, avc.num_states):
            raise ValueError("kernel shape does not match the channel")
        s = np.empty(n, dtype=np.int64)
        for xv in range(avc.num_inputs):
            pos = np.flatnonzero(x == xv)
            if pos.size:
                row = np.clip(U[xv], 0.0, None)
                s[pos] = rng.choice(avc.num_states, size=pos.size, p=row / row.sum())
        return _clip_from_end(avc, s, Lambda)

    # greedy_dependent: steer each letter's output row toward the
    # input-blind worst-case output law, spending the budget greedily.
    p = np.asarray(P, dtype=float) if P is not None else np.full(avc.num_inputs, 1.0 / avc.num_inputs)
    _, Q_star = min_mi_std(avc, p, Lambda)
    target = p @ induced_channel_q(avc, Q_star).w
    remaining = n * Lambda + 1e-12
    s = np.empty(n, dtype=np.int64)
    for t in range(n):
        best_s, best_tv = None, math.inf
        for sv in range(avc.num_states):
            if avc.cost[sv] > remaining:
                continue
            tv = variational_distance(avc.W[sv, x[t]], target)
            if tv < best_tv - 1e-12:
                best_s, best_tv = sv, tv
        s[t] = best_s
        remaining -= float(avc.cost[best_s])
    return s


# ---------------------------------------------------------------------------
# side information
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CsiReport:
    """Per-chunk side information handed to the receiver.

    kind "cost" carries quantized per-chunk cost estimates; kind
    "channels" carries, per chunk, a set of candidate chunk channels
    containing the true one.
    """

    kind: str
    epsilon: float
    cost_estimates: tuple[float, ...] | None = None
    channel_sets: tuple[tuple[ChannelMatrix, ...], ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("cost", "channels"):
            raise ValueError(f"unknown side-information kind {self.kind!r}")
        if self.kind == "cost" and self.cost_estimates is None:
            raise ValueError("cost reports need estimates")
        if self.kind == "channels" and self.channel_sets is None:
            raise ValueError("channel reports need channel sets")

    @property
    def num_chunks(self) -> int:
        payload = self.cost_estimates if self.kind == "cost" else self.channel_sets
        return len(payload)


_GRID_CACHE: dict[tuple, np.ndarray] = {}


def chunk_cost_grid(avc: Avc, c: int) -> np.ndarray:
    """All achievable per-chunk average costs, ascending."""
    key = (tuple(float(v) for v in avc.cost), c)
    grid = _GRID_CACHE.get(key)
    if grid is None:
        values = {
            round(sum(k * cost for k, cost in zip(comp, avc.cost)) / c, 12)
            for comp in iter_compositions(c, avc.num_states)
        }
        grid = np.asarray(sorted(values))
        _GRID_CACHE[key] = grid
    return grid


def _snap_to_grid(value: float, grid: np.ndarray) -> float:
    """Nearest grid point, ties upward."""
    idx = int(np.searchsorted(grid, value))
    if idx == 0:
        return float(grid[0])
    if idx >= grid.size:
        return float(grid[-1])
    below, above = float(grid[idx - 1]), float(grid[idx])
    return above if value - below >= above - value else below


def make_cost_csi(
    avc: Avc, s_seq: Sequence[int] | np.ndarray, c: int, epsilon: float, noise_seed: int
) -> CsiReport:
    """Quantized per-chunk cost estimates.

    Each chunk's true average cost gets additive noise uniform on
    [0, epsilon], then snaps to the nearest achievable chunk cost. The
    estimate never undershoots the true cost; when epsilon is not
    aligned with the cost grid it can overshoot the true cost plus
    epsilon by at most half a grid step.
    """
    s = np.asarray(s_seq, dtype=np.int64)
    if s.size % c != 0:
        raise ValueError("state sequence length must be a chunk multiple")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(noise_seed)))
    grid = chunk_cost_grid(avc, c)
    estimates = []
    for m in range(s.size // c):
        true_cost = float(avc.cost[s[m * c : (m + 1) * c]].mean())
        noisy = true_cost + (rng.uniform(0.0, epsilon) if epsilon > 0.0 else 0.0)
        estimates.append(_snap_to_grid(noisy, grid))
    return CsiReport(kind="cost", epsilon=epsilon, cost_estimates=tuple(estimates))


def true_chunk_channel(
    avc: Avc, x_chunk: Sequence[int] | np.ndarray, s_chunk: Sequence[int] | np.ndarray
) -> ChannelMatrix:
    """Per-input average of the letter channels along a chunk.

    Row x averages W(.|x, s_t) over positions carrying x; inputs absent
    from the chunk average over all positions instead, which keeps the
    row stochastic while never entering any P-weighted product.
    """
    x = np.asarray(x_chunk, dtype=np.int64)
    s = np.asarray(s_chunk, dtype=np.int64)
    if x.shape != s.shape or x.size == 0:
        raise ValueError("chunk sequences must be aligned and non-empty")
    rows = np.empty((avc.num_inputs, avc.num_outputs))
    for xv in range(avc.num_inputs):
        pos = np.flatnonzero(x == xv)
        if pos.size == 0:
            rows[xv] = avc.W[s, xv, :].mean(axis=0)
        else:
            rows[xv] = avc.W[s[pos], xv, :].mean(axis=0)
    return ChannelMatrix(rows)


class ChannelCsiStream:
    """Chunk-by-chunk channel side information with decoys.

    Each chunk's set holds the true per-input-normalized chunk channel
    plus decoys drawn from a seeded pool of state-mixture channels of
    the same Avc (random mixing weights, optionally cost-capped), kept
    only when their I(P, .) is at least the true chunk's minus epsilon.
    That keeps the set minimum within epsilon of the truth while leaving
    the receiver genuinely unsure which mixture acted. Set size is
    capped at c^v by default; when no pooled decoy qualifies the set is
    the truth alone.

    The stream draws from one generator in chunk order, so a session
    that stops early and an audit that replays the full block see
    identical sets for the shared prefix.
    """

    def __init__(
        self,
        avc: Avc,
        c: int,
        P: np.ndarray,
        epsilon: float,
        seed: int,
        max_set: int | None = None,
        v: int = 2,
        cost_cap: float | None = None,
        pool_size: int = 64,
        attempts: int = 16,
    ):
        self.avc = avc
        self.c = int(c)
        self.p = np.asarray(P, dtype=float)
        self.epsilon = float(epsilon)
        self.cap = int(max_set) if max_set is not None else c ** v
        if self.cap < 1:
            raise ValueError("set size cap must be at least 1")
        self.attempts = int(attempts)
        self._rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        mixes = self._rng.dirichlet(np.ones(avc.num_states), size=pool_size)
        if cost_cap is not None:
            ok = mixes @ avc.cost <= cost_cap + 1e-12
            mixes = mixes[ok]
        self._pool = [induced_channel_q(avc, Q) for Q in mixes]
        self._pool_mi = np.array([mutual_information(self.p, V.w) for V in self._pool])

    def next_chunk(
        self, x_chunk: np.ndarray, s_chunk: np.ndarray
    ) -> tuple[tuple[ChannelMatrix, ...], float]:
        """Side-information set for the next chunk, plus the truth's MI."""
        truth = true_chunk_channel(self.avc, x_chunk, s_chunk)
        mi_true = mutual_information(self.p, truth.w)
        members = [truth]
        mi_members = [mi_true]
        if self._pool:
            tries = self._rng.integers(0, len(self._pool), size=self.attempts)
            for idx in tries:
                if len(members) >= self.cap:
                    break
                if self._pool_mi[idx] >= mi_true - self.epsilon:
                    members.append(self._pool[idx])
                    mi_members.append(float(self._pool_mi[idx]))
        if mi_true - min(mi_members) > self.epsilon + 1e-9:
            raise RuntimeError("side-information set violates its consistency contract")
        return tuple(members), mi_true


def make_channel_csi(
    avc: Avc,
    x_seq: Sequence[int] | np.ndarray,
    s_seq: Sequence[int] | np.ndarray,
    c: int,
    P: np.ndarray,
    epsilon: float,
    seed: int,
    max_set: int | None = None,
    v: int = 2,
    cost_cap: float | None = None,
    pool_size: int = 64,
    attempts: int = 16,
) -> CsiReport:
    """Per-chunk channel sets for a whole block; see ChannelCsiStream.

    Deterministic in `seed`, so a report consumed chunk-by-chunk during
    a session can be regenerated exactly for audits.
    """
    x = np.asarray(x_seq, dtype=np.int64)
    s = np.asarray(s_seq, dtype=np.int64)
    if x.shape != s.shape or x.size % c != 0:
        raise ValueError("sequences must align and be chunk multiples")
    stream = ChannelCsiStream(
        avc, c, P, epsilon, seed,
        max_set=max_set, v=v, cost_cap=cost_cap, pool_size=pool_size, attempts=attempts,
    )
    sets = []
    for m in range(x.size // c):
        sl = slice(m * c, (m + 1) * c)
        members, _ = stream.next_chunk(x[sl], s[sl])
        sets.append(members)
    return CsiReport(kind="channels", epsilon=epsilon, channel_sets=tuple(sets))
