"""From ensemble guarantees to small keyed families.

Two mechanisms. First, a feasibility test for replacing an ensemble
average by K sampled codebooks: K iid draws suffice once the stated
large-deviation inequality holds, and `eliminate` performs the draws.
Second, a polynomial tag scheme that spends a sqrt(K) factor of the
message space to let the receiver reject all but one survivor of a list
decode, with forged survivors accepted with probability at most d/q.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .alphabet import binary_entropy, log2_int
from .avc import Avc
from .capacity import min_mi_dep
from .gf import GF2m


# ---------------------------------------------------------------------------
# sampling a family from an ensemble
# ---------------------------------------------------------------------------


def elimination_feasible(
    mu: float, delta_n: float, n: int, K: int, R: float, S_size: int
) -> bool:
    """Whether K sampled codebooks can replace the ensemble average.

    Checks mu ln(1/delta_n) - h(mu) ln 2 > (n/K) (R ln 2 + ln|S|), with
    h the binary entropy in bits; mu is the tolerable family error level
    and delta_n the ensemble error. Mixed units are deliberate: the
    left side converts bit-denominated entropy into nats to match the
    right side's natural logs.
    """
    if not (0.0 <= mu <= 1.0):
        raise ValueError("mu must lie in [0, 1]")
    if not (0.0 < delta_n <= 1.0):
        raise ValueError("delta_n must lie in (0, 1]")
    if n < 1 or K < 1 or R < 0.0 or S_size < 1:
        raise ValueError("n, K, S_size must be positive and R nonnegative")
    lhs = mu * math.log(1.0 / delta_n) - binary_entropy(mu) * math.log(2.0)
    rhs = (n / K) * (R * math.log(2.0) + math.log(S_size))
    return lhs > rhs


@dataclass(frozen=True)
class EliminationPlan:
    """Parameters of a family draw, with the feasibility check attached."""

    mu: float
    delta_n: float
    n: int
    K: int
    R: float
    S_size: int

    @property
    def feasible(self) -> bool:
        return elimination_feasible(self.mu, self.delta_n, self.n, self.K, self.R, self.S_size)


class SampledFamily:
    """K codebooks drawn independently from one ensemble."""

    def __init__(self, members: Sequence):
        if not members:
            raise ValueError("family cannot be empty")
        self._members = tuple(members)

    @property
    def K(self) -> int:
        return len(self._members)

    def member(self, k: int):
        return self._members[k]


def eliminate(ensemble_sampler: Callable[[int], object], K: int, seed: int) -> SampledFamily:
    """Draw K codebooks with per-member seeds derived from one master.

    Each member gets an independent child seed, so the draws could run in
    parallel and still reproduce bit-for-bit in index order.
    """
    if K < 1:
        raise ValueError("need at least one member")
    master = np.random.SeedSequence(seed)
    children = master.spawn(K)
    members = [ensemble_sampler(int(child.generate_state(1)[0])) for child in children]
    return SampledFamily(members)


# ---------------------------------------------------------------------------
# polynomial tags
# ---------------------------------------------------------------------------


class AuthScheme:
    """Tagging layer mapping messages to codebook indices.

    With family size K = q^2 (q = 2^k), a message m in [N'] selects the
    degree < d polynomial f_m whose coefficients are the base-q digits of
    m, and the transmitted index is m q + t with tag t = f_m(a) + b for
    key (a, b) in F_q^2. N' = floor(N / q), so q divides the used index
    space N' q exactly even when it does not divide N; the few top
    indices are simply never transmitted.
    """

    def __init__(self, N: int, K: int):
        if K < 4:
            raise ValueError("family size must be at least 4")
        k2 = K.bit_length() - 1
        if (1 << k2) != K or k2 % 2 != 0:
            raise ValueError("family size must be an even power of two")
        self.k = k2 // 2
        self.field = GF2m(self.k)
        self.q = self.field.q
        self.N = int(N)
        self.N_prime = self.N // self.q
        if self.N_prime < 1:
            raise ValueError("message space smaller than one tag block")
        self.N_used = self.N_prime * self.q
        self.d = max(1, math.ceil(log2_int(self.N) / self.k))
        # every message must fit in d base-q digits
        if log2_int(self.N_prime) > self.d * self.k + 1e-9:
            raise ValueError("digit budget too small for the message space")

    def coefficients(self, m: int) -> list[int]:
        if not (0 <= m < self.N_prime):
            raise ValueError("message outside [0, N')")
        digits = []
        for _ in range(self.d):
            m, digit = divmod(m, self.q)
            digits.append(digit)
        return digits

    def tag(self, m: int, key: tuple[int, int]) -> int:
        # The message polynomial carries no constant term (digit i scales
        # a^(i+1)), so two distinct messages always disagree on a
        # nonconstant polynomial and the conditional forgery success is
        # at most d/q. With a constant term, messages differing only in
        # their lowest digit would be forgeable with certainty.
        a, b = key
        return self.field.mul(a, self.field.eval_poly(self.coefficients(m), a)) ^ b

    def sample_key(self, rng: np.random.Generator) -> tuple[int, int]:
        pair = rng.integers(0, self.q, size=2)
        return int(pair[0]), int(pair[1])


def auth_encode(m: int, key: tuple[int, int], scheme: AuthScheme) -> int:
    """Codebook index carrying message m under the given key."""
    return m * scheme.q + scheme.tag(m, key)


def auth_decode_index(index: int, scheme: AuthScheme) -> tuple[int, int]:
    """Split an index into (message, tag); rejects out-of-range indices."""
    if not (0 <= index < scheme.N_used):
        raise ValueError("index outside the tagged range")
    return divmod(index, scheme.q)


def auth_disambiguate(
    candidates: Sequence[int], key: tuple[int, int], scheme: AuthScheme
) -> tuple[int | None, str]:
    """Resolve a candidate index list to a message via tag verification.

    Returns (message, "ok") when exactly one candidate carries a valid
    tag; otherwise (None, "none-accepted") or (None, "ambiguous").
    Indices outside the tagged range never verify.
    """
    accepted = []
    for index in candidates:
        if not (0 <= index < scheme.N_used):
            continue
        m, t = divmod(int(index), scheme.q)
        if t == scheme.tag(m, key):
            accepted.append(m)
    uniq = sorted(set(accepted))
    if len(uniq) == 1:
        return uniq[0], "ok"
    if not uniq:
        return None, "none-accepted"
    return None, "ambiguous"


def forged_acceptance_bound(scheme: AuthScheme) -> float:
    """Worst-case acceptance probability of any fixed forged index."""
    return scheme.d / scheme.q


# ---------------------------------------------------------------------------
# list-code operating point
# ---------------------------------------------------------------------------


def list_code_rate_params(avc: Avc, P, Lambda: float, eps: float) -> tuple[float, int]:
    """Rate and list-size pair for eps-backoff list decoding.

    Rate is the input-aware hull minimum at P minus eps; the list bound
    is floor(6 log2|Y| / eps) + 1.
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    value, _ = min_mi_dep(avc, P, Lambda)
    R = value - eps
    L = math.floor(6.0 * math.log2(avc.num_outputs) / eps) + 1
    return R, L
