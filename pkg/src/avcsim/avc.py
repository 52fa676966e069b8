"""State-dependent channel model with per-state costs.

An `Avc` bundles a family of row-stochastic matrices W(.|., s), one per
state s, with a cost vector over states. The cheapest state always costs
zero (enforced at construction) so a zero budget still leaves the state
sequence space non-empty.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .alphabet import ChannelMatrix, InputDistribution

COST_TOL = 1e-9
ADMISSIBILITY_SLACK = 1e-12


class Avc:
    """Finite-alphabet channel whose law is selected per letter by a state."""

    __slots__ = ("W", "cost", "name")

    def __init__(
        self,
        W: Sequence[Sequence[Sequence[float]]] | np.ndarray,
        cost: Sequence[float] | np.ndarray,
        name: str | None = None,
    ):
        w = np.asarray(W, dtype=float)
        if w.ndim != 3:
            raise ValueError("W must have shape (num_states, num_inputs, num_outputs)")
        for s in range(w.shape[0]):
            ChannelMatrix(w[s])  # row-stochastic validation per state
        c = np.asarray(cost, dtype=float)
        if c.ndim != 1 or c.size != w.shape[0]:
            raise ValueError("cost vector length must match the number of states")
        if np.any(c < 0.0):
            raise ValueError("state costs must be nonnegative")
        if c.min() > COST_TOL:
            raise ValueError("cheapest state must cost zero")
        c = c.copy()
        c[np.argmin(c)] = 0.0
        self.W = w
        self.cost = c
        self.name = name

    @property
    def num_states(self) -> int:
        return int(self.W.shape[0])

    @property
    def num_inputs(self) -> int:
        return int(self.W.shape[1])

    @property
    def num_outputs(self) -> int:
        return int(self.W.shape[2])

    @property
    def lambda_star(self) -> float:
        """Largest per-letter cost, the saturation point of any budget."""
        return float(self.cost.max())

    def __repr__(self) -> str:
        tag = self.name or f"{self.num_inputs}x{self.num_outputs}x{self.num_states}"
        return f"Avc({tag})"


@dataclass(frozen=True)
class StateConstraint:
    """Per-letter cost budget: a length-n state sequence must satisfy
    sum_t cost(s_t) <= n * Lambda."""

    Lambda: float

    def __post_init__(self) -> None:
        if self.Lambda < 0.0:
            raise ValueError("budget must be nonnegative")


@dataclass(frozen=True)
class HullPoint:
    """A channel obtained by averaging states, with its mixing cost.

    `weights` is either a distribution over states (input-independent
    mixing) or a per-input row-stochastic |X| x |S| array. The recorded
    cost must match the weights within COST_TOL against the given Avc.
    """

    channel: ChannelMatrix
    weights: np.ndarray
    mixing_cost: float

    @staticmethod
    def from_state_mix(avc: Avc, Q: np.ndarray) -> "HullPoint":
        ch = induced_channel_q(avc, Q)
        cost = float(np.asarray(Q, dtype=float) @ avc.cost)
        return HullPoint(ch, np.asarray(Q, dtype=float), cost)

    @staticmethod
    def from_input_mix(avc: Avc, P: InputDistribution, U: np.ndarray) -> "HullPoint":
        ch = induced_channel_u(avc, U)
        u = np.asarray(U, dtype=float)
        cost = float(P.p @ (u @ avc.cost))
        return HullPoint(ch, u, cost)

    def validate_cost(self, claimed: float) -> None:
        if abs(claimed - self.mixing_cost) > COST_TOL:
            raise ValueError(
                f"claimed cost {claimed!r} differs from mixing cost {self.mixing_cost!r}"
            )


# ---------------------------------------------------------------------------
# block-level operations
# ---------------------------------------------------------------------------


def state_cost(avc: Avc, s_seq: Sequence[int] | np.ndarray) -> float:
    """Total cost of a state sequence (0.0 for the empty sequence)."""
    s = np.asarray(s_seq, dtype=np.int64)
    if s.size == 0:
        return 0.0
    if s.min() < 0 or s.max() >= avc.num_states:
        raise ValueError("state sequence leaves the state alphabet")
    return float(avc.cost[s].sum())


def admissible(avc: Avc, s_seq: Sequence[int] | np.ndarray, Lambda: float) -> bool:
    """Whether the sequence fits the per-letter budget Lambda.

    A tiny absolute slack absorbs float accumulation, so a sequence
    sitting exactly on the budget is admissible.
    """
    s = np.asarray(s_seq, dtype=np.int64)
    return state_cost(avc, s) <= s.size * Lambda + ADMISSIBILITY_SLACK


def block_prob(
    avc: Avc,
    x_seq: Sequence[int] | np.ndarray,
    y_seq: Sequence[int] | np.ndarray,
    s_seq: Sequence[int] | np.ndarray,
) -> float:
    """prod_t W(y_t | x_t, s_t); the empty product is 1.0."""
    x = np.asarray(x_seq, dtype=np.int64)
    y = np.asarray(y_seq, dtype=np.int64)
    s = np.asarray(s_seq, dtype=np.int64)
    if not (x.shape == y.shape == s.shape):
        raise ValueError("x, y and s sequences must have equal length")
    if x.size == 0:
        return 1.0
    return float(np.prod(avc.W[s, x, y]))


def induced_channel_q(avc: Avc, Q: Sequence[float] | np.ndarray) -> ChannelMatrix:
    """Average the state family under a distribution on states."""
    q = np.asarray(Q, dtype=float)
    if q.shape != (avc.num_states,):
        raise ValueError("Q must be a distribution over the state alphabet")
    return ChannelMatrix(np.tensordot(q, avc.W, axes=(0, 0)))


def induced_channel_u(avc: Avc, U: Sequence[Sequence[float]] | np.ndarray) -> ChannelMatrix:
    """Average the state family under a per-input kernel U(s|x).

    Row x of the result is sum_s U(s|x) W(.|x, s), so the mixing may
    depend on the transmitted symbol.
    """
    u = np.asarray(U, dtype=float)
    if u.shape != (avc.num_inputs, avc.num_states):
        raise ValueError("U must have shape (num_inputs, num_states)")
    rows = np.einsum("xs,sxy->xy", u, avc.W)
    return ChannelMatrix(rows)


# ---------------------------------------------------------------------------
# construction from presets and files
# ---------------------------------------------------------------------------


def _bitflip() -> Avc:
    flip = [[0.0, 1.0], [1.0, 0.0]]
    ident = [[1.0, 0.0], [0.0, 1.0]]
    return Avc([ident, flip], [0.0, 1.0], name="bitflip")


def _real_adder() -> Avc:
    # y = x + s over the reals, so outputs live in {0, 1, 2}.
    s0 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
    s1 = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    return Avc([s0, s1], [0.0, 1.0], name="real-adder")


PRESETS = {"bitflip": _bitflip, "real-adder": _real_adder}


def avc_from_dict(obj: dict) -> Avc:
    """Build an Avc from the on-disk description.

    Keys: X, Y, S (alphabet sizes), W (list of |S| row-major matrices),
    l (cost list). Extra keys are ignored so files can carry notes.
    """
    try:
        nx, ny, ns = int(obj["X"]), int(obj["Y"]), int(obj["S"])
        W = np.asarray(obj["W"], dtype=float).reshape(ns, nx, ny)
        cost = obj["l"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed channel description: {exc}") from exc
    return Avc(W, cost, name=obj.get("name"))


def load_avc(source: str | Path) -> Avc:
    """Resolve a preset name or a JSON file path to an Avc."""
    key = str(source)
    if key in PRESETS:
        return PRESETS[key]()
    path = Path(source)
    if not path.exists():
        raise ValueError(f"unknown preset or missing file: {source!r}")
    with open(path) as fh:
        return avc_from_dict(json.load(fh))
