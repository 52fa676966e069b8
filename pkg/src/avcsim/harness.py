"""Monte Carlo harness: rateless sessions, error estimation, audits.

A session transmits a keyed chunked codeword, lets the jammer act under
its cost budget, feeds per-chunk side information to the receiver, and
fires the stopping rule; decode then happens either literally (small
codebooks) or through an exact distributional shortcut (astronomically
large ones, where enumerating competitors is impossible but their
score law is fully computable). Everything derives from integer seeds,
so audits can regenerate a session's state sequence and side
information bit for bit.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from random import Random
from typing import Sequence

import numpy as np

from .alphabet import log2_int, mutual_information, type_class_size, variational_distance
from .avc import Avc, admissible
from .capacity import CachedStdMin
from .codebook import ChunkedCodebook, KeyedCodebookFamily, truncate
from .decoding import concat_list_decode, mmi_decode, tau_dep, tau_std
from .derand import AuthScheme, auth_disambiguate, auth_encode
from .jammer import ChannelCsiStream, JammerStrategy, chunk_cost_grid, jam, make_cost_csi

WILSON_Z = 1.959963984540054

# log2 threshold below which an event is treated as never happening in a
# single draw; each use is one certification of at most 2^-40 leakage.
CERTIFY_LOG2 = -40.0

_ROLE_KEY = 0
_ROLE_JAM = 1
_ROLE_CHANNEL = 2
_ROLE_CSI = 3
_ROLE_AUTH = 4
_ROLE_DECODE = 5
_ROLE_MESSAGE = 6


def wilson_interval(failures: float, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    """Wilson 95% score interval; accepts fractional failure counts.

    Fractional counts arise from exact key averaging, where each trial
    contributes the fraction of keys that failed.
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= failures <= trials:
        raise ValueError("failures must lie in [0, trials]")
    p_hat = failures / trials
    z2 = z * z
    denom = 1.0 + z2 / trials
    center = (p_hat + z2 / (2 * trials)) / denom
    half = z * math.sqrt(p_hat * (1 - p_hat) / trials + z2 / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _role_seed(trial_seed: int, role: int) -> int:
    state = np.random.SeedSequence(trial_seed, spawn_key=(role,)).generate_state(2)
    return int(state[0]) | (int(state[1]) << 32)


def _role_rng(trial_seed: int, role: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(trial_seed, spawn_key=(role,))))


def _role_py(trial_seed: int, role: int) -> Random:
    return Random(_role_seed(trial_seed, role))


def derive_trial_seed(root_seed: int, message_slot: int, trial: int) -> int:
    """Stable 64-bit per-trial seed; identical for any worker split."""
    state = np.random.SeedSequence(
        root_seed, spawn_key=(0xA11CE, message_slot, trial)).generate_state(2)
    return int(state[0]) | (int(state[1]) << 32)


def sample_outputs(avc: Avc, x_seq: np.ndarray, s_seq: np.ndarray,
                   rng: np.random.Generator) -> np.ndarray:
    """Draw y_t ~ W(.|x_t, s_t) for every position at once."""
    cum = np.cumsum(avc.W, axis=2)
    rows = cum[s_seq, x_seq]
    u = rng.random(x_seq.size)
    y = (rows < u[:, None]).sum(axis=1)
    return np.minimum(y, avc.num_outputs - 1).astype(np.int64)


@dataclass
class SessionSpec:
    """Everything needed to run one family of sessions repeatably."""

    avc: Avc
    family: KeyedCodebookFamily
    Lambda: float
    strategy: JammerStrategy
    mode: str                      # "std" or "dep"
    delta: float = 0.05            # std threshold margin
    eps: float = 0.05              # dep threshold margin and CSI consistency
    xi: float = 0.125              # shell radius scale
    delta_filter: float = 0.5      # dep CSI output filter
    csi_epsilon: float = 0.0       # std cost-CSI noise scale
    csi_max_set: int | None = 4
    csi_cost_cap: float | None = None
    csi_pool: int = 64
    csi_attempts: int = 16
    use_auth: bool = False
    exact_cap: int = 4096          # largest N decoded by literal scan
    force_decode_at_hi: bool = False

    def __post_init__(self):
        if self.mode not in ("std", "dep"):
            raise ValueError("mode must be 'std' or 'dep'")
        if self.use_auth and self.mode != "dep":
            raise ValueError("authentication applies to dep sessions only")

    @property
    def c(self) -> int:
        return int(sum(self.family.composition))

    @property
    def n(self) -> int:
        return self.c * self.family.M_hi

    @property
    def P(self) -> np.ndarray:
        comp = np.asarray(self.family.composition, dtype=float)
        return comp / comp.sum()

    def fingerprint(self) -> tuple:
        return (
            self.family, self.mode, self.Lambda, self.delta, self.eps, self.xi,
            self.delta_filter, self.csi_epsilon, self.csi_max_set,
            self.csi_cost_cap, self.csi_pool, self.csi_attempts, self.use_auth,
            self.exact_cap, self.force_decode_at_hi,
            self.avc.W.tobytes(), self.avc.cost.tobytes(),
        )


@dataclass
class SessionTrace:
    mode: str
    trial_seed: int
    key: int
    message: int                   # payload message (auth: the pre-tag value)
    index: int                     # transmitted codebook index
    decode_time: int | None        # chunk count at decode, None on outage
    outage: bool
    decoded: int | None
    error: bool
    empirical_rate: float | None
    realized_cost: float | None    # mean state cost over the decoded prefix
    feedback: str                  # one bit per chunk until decode or M_hi
    list_size: int | None = None
    auth_status: str | None = None
    contains_transmitted: bool | None = None
    survivor_log2: float | None = None
    error_fraction: float | None = None  # set under exact key averaging
    forced: bool = False


TRACE_COLUMNS = (
    "mode", "trial_seed", "key", "message", "index", "decode_time", "outage",
    "decoded", "error", "empirical_rate", "realized_cost", "list_size",
    "auth_status", "contains_transmitted", "survivor_log2", "error_fraction",
    "forced", "feedback",
)


def trace_to_row(trace: SessionTrace) -> list[str]:
    vals = []
    for col in TRACE_COLUMNS:
        v = getattr(trace, col)
        if v is None:
            vals.append("")
        elif isinstance(v, bool):
            vals.append("1" if v else "0")
        elif isinstance(v, float):
            vals.append(repr(v))
        else:
            vals.append(str(v))
    return vals


@dataclass
class ErrorEstimate:
    per_message: tuple[tuple[int, int, float], ...]  # (message, trials, failures)
    point: float                   # max per-message failure frequency
    wilson_lo: float
    wilson_hi: float
    argmax_message: int
    trials_per_message: int
    traces: list[SessionTrace] = field(default_factory=list)


class _Runtime:
    """Per-process derived state shared across a spec's sessions."""

    def __init__(self, spec: SessionSpec):
        self.spec = spec
        self.P = spec.P
        self.c = spec.c
        self.comp = tuple(int(v) for v in spec.family.composition)
        self.log2_N = log2_int(spec.family.N)
        self.exact = spec.family.N <= spec.exact_cap
        self.is_binary = (spec.avc.num_inputs == 2 and spec.avc.num_outputs == 2
                          and len(self.comp) == 2)
        self.class_size = type_class_size(self.comp)
        self.std_cache = CachedStdMin(spec.avc, self.P) if spec.mode == "std" else None
        self.scheme = AuthScheme(spec.family.N, spec.family.K) if spec.use_auth else None
        if spec.mode == "std":
            grid = chunk_cost_grid(spec.avc, self.c)
            gaps = np.diff(grid)
            self.grid_halfgap = float(gaps.max() / 2) if gaps.size else 0.0
        if not self.exact and not self.is_binary:
            raise RuntimeError(
                "statistical decoding shortcut covers binary alphabets only; "
                "lower N or use a binary channel")
        self._books: dict[tuple[int, bool], ChunkedCodebook] = {}

    def book(self, key: int, materialize: bool) -> ChunkedCodebook:
        """Family member with a small cache; repeat keys skip the rebuild."""
        slot = (int(key), bool(materialize))
        cb = self._books.get(slot)
        if cb is None:
            cb = self.spec.family.member(key, materialize=materialize)
            if len(self._books) >= 130:
                self._books.clear()
            self._books[slot] = cb
        return cb

    def message_space(self):
        if self.scheme is not None:
            return self.scheme.N_prime
        return self.spec.family.N


_RUNTIMES: dict = {}


def _runtime_for(spec: SessionSpec) -> _Runtime:
    key = spec.fingerprint()
    rt = _RUNTIMES.get(key)
    if rt is None:
        rt = _Runtime(spec)
        _RUNTIMES[key] = rt
    return rt


def _logsumexp2(vals: np.ndarray) -> float:
    finite = vals[np.isfinite(vals)]
    if finite.size == 0:
        return float("-inf")
    m = float(finite.max())
    return m + math.log2(float(np.exp2(finite - m).sum()))


def _log2_conv(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    out = np.full(a.size + b.size - 1, -np.inf)
    for i in range(a.size):
        if np.isfinite(a[i]):
            out[i:i + b.size] = np.logaddexp2(out[i:i + b.size], a[i] + b)
    return out


def _hypergeom_log2_pmf(c: int, c0: int, z: int) -> tuple[int, np.ndarray]:
    """Support offset and log2 pmf of the (0,0)-agreement count in one chunk.

    A competitor chunk is uniform on the type class with c0 zeros; given
    that the received chunk has z zeros, the number of positions where
    both are zero is hypergeometric.
    """
    k_lo = max(0, z - (c - c0))
    k_hi = min(c0, z)
    total = math.comb(c, c0)
    pmf = np.array([
        math.comb(z, k) * math.comb(c - z, c0 - k) / total
        for k in range(k_lo, k_hi + 1)
    ])
    with np.errstate(divide="ignore"):
        return k_lo, np.log2(pmf)


def _score_of_counts(n00: np.ndarray, n01: np.ndarray, n10: np.ndarray,
                     n11: np.ndarray, total: int) -> np.ndarray:
    """Plug-in mutual information of 2x2 joint counts, vectorized."""
    cells = np.stack([n00, n01, n10, n11], axis=-1).astype(float) / total
    rows = cells[..., 0] + cells[..., 1]
    cols = cells[..., 0] + cells[..., 2]
    marg = np.stack([rows * cols, rows * (1 - cols),
                     (1 - rows) * cols, (1 - rows) * (1 - cols)], axis=-1)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = cells * (np.log2(cells) - np.log2(marg))
    terms[~np.isfinite(terms)] = 0.0
    return np.maximum(terms.sum(axis=-1), 0.0)


def _chernoff_tail_log2(class_data: list[tuple[int, int, np.ndarray, int]],
                        t: float, upper: bool) -> float:
    """Chernoff bound on log2 P(sum >= t) (or <= t), sum over chunk classes.

    class_data entries are (count, k_lo, log2 pmf, support length). The
    per-class moment generating functions are evaluated as one padded
    matrix so the golden-section search over the tilt stays cheap.
    """
    rows = len(class_data)
    width = max(cd[3] for cd in class_data)
    counts = np.array([cd[0] for cd in class_data], dtype=float)
    logpmf = np.full((rows, width), -np.inf)
    kvals = np.zeros((rows, width))
    for r, (_cnt, k_lo, lp, w) in enumerate(class_data):
        logpmf[r, :w] = lp
        kvals[r, :w] = k_lo + np.arange(w)

    def objective(theta: float) -> float:
        a = logpmf + theta * kvals
        m = a.max(axis=1)
        vals = m + np.log2(np.exp2(a - m[:, None]).sum(axis=1))
        return float(counts @ vals) - theta * t

    lo, hi = (1e-9, 80.0) if upper else (-80.0, -1e-9)
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a_, b_ = lo, hi
    x1 = b_ - phi * (b_ - a_)
    x2 = a_ + phi * (b_ - a_)
    f1, f2 = objective(x1), objective(x2)
    for _ in range(40):
        if f1 <= f2:
            b_, x2, f2 = x2, x1, f1
            x1 = b_ - phi * (b_ - a_)
            f1 = objective(x1)
        else:
            a_, x1, f1 = x1, x2, f2
            x2 = a_ + phi * (b_ - a_)
            f2 = objective(x2)
    best = min(f1, f2, objective(lo), objective(hi))
    return min(0.0, best)


def _exact_sum_log2_pmf(class_data: list[tuple[int, int, np.ndarray, int]]) -> tuple[int, np.ndarray]:
    """Exact log2 pmf of the summed agreement count via repeated squaring."""
    total_off = 0
    acc: np.ndarray | None = None
    for count, k_lo, logpmf, _width in class_data:
        base_off, base = k_lo, logpmf
        part_off, part = 0, np.array([0.0])
        e = count
        while e > 0:
            if e & 1:
                part = _log2_conv(part, base)
                part_off += base_off
            e >>= 1
            if e:
                base = _log2_conv(base, base)
                base_off += base_off
        total_off += part_off
        acc = part if acc is None else _log2_conv(acc, part)
    if acc is None:
        return 0, np.array([0.0])
    return total_off, acc


def _poisson_positive(lam_log2: float, rng: np.random.Generator) -> bool:
    """Whether a Poisson(2^lam_log2) draw is >= 1."""
    if lam_log2 <= CERTIFY_LOG2:
        return False
    if lam_log2 >= 40.0:
        return True
    return rng.poisson(2.0 ** lam_log2) >= 1


def _statistical_std_correct(rt: _Runtime, x: np.ndarray, y: np.ndarray,
                             M: int, index: int,
                             rng: np.random.Generator) -> bool:
    """Exact law of 'the transmitted word wins the empirical-MI scan'.

    Any competitor's joint type with y is pinned down by one number: the
    count of positions where both the competitor and y are zero. Its
    distribution is an independent sum of per-chunk hypergeometrics, the
    score is convex along that line (fixed marginals), and the decoder's
    tie rule prefers smaller indices. A Chernoff certificate settles the
    typical trial; near-threshold trials fall back to the exact pmf.
    """
    c, c0 = rt.c, rt.comp[0]
    Mc = M * c
    xz = (x[:Mc].reshape(M, c) == 0)
    yz = (y[:Mc].reshape(M, c) == 0)
    z = yz.sum(axis=1)
    k_true = int((xz & yz).sum())
    Z = int(z.sum())

    k_lo = max(0, Z - M * (c - c0))
    k_hi = min(M * c0, Z)
    ks = np.arange(k_lo, k_hi + 1)
    scores = _score_of_counts(ks, M * c0 - ks, Z - ks, M * (c - c0) - Z + ks, Mc)
    s_star = float(scores[k_true - k_lo])

    risky = scores >= s_star - 1e-12           # beats or ties the truth
    counts = np.bincount(z, minlength=c + 1)
    class_data = []
    for zv in range(c + 1):
        if counts[zv]:
            off, logpmf = _hypergeom_log2_pmf(c, c0, zv)
            class_data.append((int(counts[zv]), off, logpmf, logpmf.size))

    safe_idx = np.nonzero(~risky)[0]
    tails_ok = safe_idx.size > 0 and not risky[safe_idx[0]:safe_idx[-1] + 1].any()
    if tails_ok:
        parts = []
        if safe_idx[0] > 0:
            parts.append(_chernoff_tail_log2(class_data, float(ks[safe_idx[0] - 1]), upper=False))
        if safe_idx[-1] < ks.size - 1:
            parts.append(_chernoff_tail_log2(class_data, float(ks[safe_idx[-1] + 1]), upper=True))
        p_risky = _logsumexp2(np.array(parts)) if parts else float("-inf")
        if rt.log2_N + p_risky <= CERTIFY_LOG2:
            return True

    # Exact resolution: split the risky set into strict beats and ties.
    # The summed support can sit strictly inside the global count range
    # (chunks with extreme y pin their contribution), so align by offset.
    off, logpmf = _exact_sum_log2_pmf(class_data)
    if off < k_lo or off + logpmf.size - 1 > k_hi:
        raise RuntimeError("summed pmf exceeds the score support")
    window = scores[off - k_lo: off - k_lo + logpmf.size]
    beats = window > s_star + 1e-12
    ties = np.abs(window - s_star) <= 1e-12
    log_p_beat = _logsumexp2(logpmf[beats])
    log_p_tie = _logsumexp2(logpmf[ties])
    if _poisson_positive(rt.log2_N + log_p_beat, rng):
        return False
    if index > 0 and _poisson_positive(log2_int(index) + log_p_tie, rng):
        return False
    return True


def run_session_std(spec: SessionSpec, message: int, trial_seed: int,
                    forced_key: int | None = None) -> SessionTrace:
    """One input-blind-threshold session: transmit, jam, stop, decode."""
    rt = _runtime_for(spec)
    fam = spec.family
    key = int(forced_key) if forced_key is not None else \
        int(_role_rng(trial_seed, _ROLE_KEY).integers(fam.K))
    cb = rt.book(key, rt.exact)
    index = int(message)
    x = cb.codeword(index)
    n = spec.n
    s = jam(spec.avc, spec.strategy, x, n, spec.Lambda,
            _role_seed(trial_seed, _ROLE_JAM), P=rt.P)
    y = sample_outputs(spec.avc, x, s, _role_rng(trial_seed, _ROLE_CHANNEL))
    report = make_cost_csi(spec.avc, s, rt.c, spec.csi_epsilon,
                           _role_seed(trial_seed, _ROLE_CSI))
    est = report.cost_estimates

    fired = None
    bits = []
    for m in range(1, fam.M_hi + 1):
        fire = m >= fam.M_lo and tau_std(
            m, fam.N, rt.c, est, rt.P, spec.avc, spec.delta,
            min_cache=rt.std_cache)
        bits.append("1" if fire else "0")
        if fire:
            fired = m
            break

    forced = False
    if fired is None and spec.force_decode_at_hi:
        fired = fam.M_hi
        forced = True

    if fired is None:
        return SessionTrace(
            mode="std", trial_seed=trial_seed, key=key, message=message,
            index=index, decode_time=None, outage=True, decoded=None,
            error=False, empirical_rate=None, realized_cost=None,
            feedback="".join(bits))

    Mc = fired * rt.c
    realized = float(spec.avc.cost[s[:Mc]].mean())
    rate = rt.log2_N / Mc
    if rt.exact:
        out = mmi_decode(truncate(cb, fired), y[:Mc], spec.avc.num_outputs)
        decoded: int | None = out.message
        error = decoded != index
    else:
        ok = _statistical_std_correct(rt, x, y, fired, index,
                                      _role_rng(trial_seed, _ROLE_DECODE))
        decoded = index if ok else None
        error = not ok
    return SessionTrace(
        mode="std", trial_seed=trial_seed, key=key, message=message,
        index=index, decode_time=fired, outage=False, decoded=decoded,
        error=error, empirical_rate=rate, realized_cost=realized,
        feedback="".join(bits), forced=forced)


def _fast_tv_pairs(a: Sequence[float], b: Sequence[float]) -> float:
    return 0.5 * sum(abs(x - y) for x, y in zip(a, b))


def _dep_chunk_stats(rt: _Runtime, members, z: int, k_true: int) -> tuple[int, bool]:
    """Exact shell-list size and truth membership for one chunk.

    Groups the chunk type class by the one free joint count and tests a
    whole group with a single distance check per candidate channel.
    """
    c, c0 = rt.c, rt.comp[0]
    radius = (len(rt.comp) + 1) * rt.spec.xi + 1e-12
    p0 = rt.P[0]
    targets = []
    for V in members:
        w = V.w
        targets.append((p0 * w[0, 0], p0 * w[0, 1],
                        (1 - p0) * w[1, 0], (1 - p0) * w[1, 1]))
    total = 0
    true_in = False
    for k in range(max(0, z - (c - c0)), min(c0, z) + 1):
        joint = (k / c, (c0 - k) / c, (z - k) / c, (c - c0 - z + k) / c)
        hit = any(_fast_tv_pairs(joint, t) <= radius for t in targets)
        if hit:
            total += math.comb(z, k) * math.comb(c - z, c0 - k)
            if k == k_true:
                true_in = True
    return total, true_in


def run_session_dep(spec: SessionSpec, message: int, trial_seed: int,
                    forced_key: int | None = None) -> SessionTrace:
    """One list-decoding session with channel side information and tags."""
    rt = _runtime_for(spec)
    fam = spec.family
    c = rt.c
    key = int(forced_key) if forced_key is not None else \
        int(_role_rng(trial_seed, _ROLE_KEY).integers(fam.K))
    cb = rt.book(key, rt.exact)
    scheme = rt.scheme
    if scheme is not None:
        auth_rng = _role_rng(trial_seed, _ROLE_AUTH)
        auth_key = scheme.sample_key(auth_rng)
        index = auth_encode(int(message), auth_key, scheme)
    else:
        auth_key = None
        index = int(message)
    x = cb.codeword(index)
    n = spec.n
    s = jam(spec.avc, spec.strategy, x, n, spec.Lambda,
            _role_seed(trial_seed, _ROLE_JAM), P=rt.P)
    y = sample_outputs(spec.avc, x, s, _role_rng(trial_seed, _ROLE_CHANNEL))

    stream = ChannelCsiStream(
        spec.avc, c, rt.P, spec.eps, _role_seed(trial_seed, _ROLE_CSI),
        max_set=spec.csi_max_set, cost_cap=spec.csi_cost_cap,
        pool_size=spec.csi_pool, attempts=spec.csi_attempts)

    ny = spec.avc.num_outputs
    mi_mins: list[float | None] = []
    filtered_sets = []
    bits = []
    fired = None
    for m in range(1, fam.M_hi + 1):
        sl = slice((m - 1) * c, m * c)
        members, _mi_true = stream.next_chunk(x[sl], s[sl])
        y_chunk = y[sl]
        y_freq = np.bincount(y_chunk, minlength=ny) / c
        kept = []
        kept_mi = []
        for V in members:
            out_pred = rt.P @ V.w
            if variational_distance(y_freq, out_pred) < spec.delta_filter:
                kept.append(V)
                kept_mi.append(mutual_information(rt.P, V.w))
        filtered_sets.append(tuple(kept))
        mi_mins.append(min(kept_mi) if kept_mi else None)
        fire = m >= fam.M_lo and tau_dep(m, fam.N, c, mi_mins, spec.eps)
        bits.append("1" if fire else "0")
        if fire:
            fired = m
            break

    if fired is None:
        return SessionTrace(
            mode="dep", trial_seed=trial_seed, key=key, message=message,
            index=index, decode_time=None, outage=True, decoded=None,
            error=False, empirical_rate=None, realized_cost=None,
            feedback="".join(bits))

    Mc = fired * c
    realized = float(spec.avc.cost[s[:Mc]].mean())
    rate = rt.log2_N / Mc

    if rt.exact:
        outcome = concat_list_decode(
            truncate(cb, fired), y[:Mc], filtered_sets, spec.delta_filter,
            spec.xi, ny)
        candidates = list(outcome.candidates)
        list_size = len(candidates)
        contains = index in outcome.candidates
        survivor_log2 = None
    else:
        xz = (x[:Mc].reshape(fired, c) == 0)
        yz = (y[:Mc].reshape(fired, c) == 0)
        zs = yz.sum(axis=1)
        kts = (xz & yz).sum(axis=1)
        sum_log2 = 0.0
        contains = True
        dead = False
        for m in range(fired):
            L_m, true_in = _dep_chunk_stats(rt, filtered_sets[m], int(zs[m]), int(kts[m]))
            contains = contains and true_in
            if L_m == 0:
                dead = True
                break
            sum_log2 += math.log2(L_m) - math.log2(rt.class_size)
        if dead:
            survivor_log2 = float("-inf")
            survivors: list[int] = []
            contains = False
        else:
            survivor_log2 = rt.log2_N + sum_log2
            drng = _role_rng(trial_seed, _ROLE_DECODE)
            prng = _role_py(trial_seed, _ROLE_DECODE)
            if survivor_log2 <= CERTIFY_LOG2:
                count = 0
            elif survivor_log2 <= 40.0:
                count = int(drng.poisson(2.0 ** survivor_log2))
            else:
                count = 1 << 40   # list blow-up: score honestly as failure
            survivors = []
            if 0 < count <= 1 << 20:
                for _ in range(count):
                    while True:
                        j = prng.randrange(fam.N)
                        if j != index:
                            break
                    survivors.append(j)
            elif count > 1 << 20:
                survivors = [-1]  # sentinel: unmanageably many survivors
        if survivors == [-1]:
            candidates = []
            list_size = 1 << 40
        else:
            candidates = sorted(survivors + ([index] if contains else []))
            list_size = len(candidates)

    if scheme is not None:
        if list_size > 1 << 20:
            decoded, status = None, "ambiguous"
        else:
            decoded, status = auth_disambiguate(candidates, auth_key, scheme)
        error = status != "ok" or decoded != message
    else:
        status = None
        decoded = candidates[0] if len(candidates) == 1 else None
        error = decoded != index
    return SessionTrace(
        mode="dep", trial_seed=trial_seed, key=key, message=message,
        index=index, decode_time=fired, outage=False, decoded=decoded,
        error=error, empirical_rate=rate, realized_cost=realized,
        feedback="".join(bits), list_size=list_size, auth_status=status,
        contains_transmitted=contains, survivor_log2=survivor_log2)


def run_session(spec: SessionSpec, message: int, trial_seed: int,
                forced_key: int | None = None) -> SessionTrace:
    if spec.mode == "std":
        return run_session_std(spec, message, trial_seed, forced_key)
    return run_session_dep(spec, message, trial_seed, forced_key)


_TRACE_KEEP_LIMIT = 200


def _run_batch(args) -> tuple[float, list[SessionTrace]]:
    (spec, message, slot, t_lo, t_hi, root_seed, exact_avg, keep_traces) = args
    failures = 0.0
    traces: list[SessionTrace] = []
    K = spec.family.K
    for t in range(t_lo, t_hi):
        seed = derive_trial_seed(root_seed, slot, t)
        if exact_avg:
            fails = 0
            first = None
            for k in range(K):
                tr = run_session(spec, message, seed, forced_key=k)
                if k == 0:
                    first = tr
                if tr.error:
                    fails += 1
            frac = fails / K
            failures += frac
            assert first is not None
            first.error_fraction = frac
            if keep_traces and len(traces) < _TRACE_KEEP_LIMIT:
                traces.append(first)
        else:
            tr = run_session(spec, message, seed)
            if tr.error:
                failures += 1.0
            if keep_traces:
                traces.append(tr)
    return failures, traces


def estimate_error(spec: SessionSpec, trials: int, messages_sampled: int,
                   seed: int, workers: int = 1,
                   exact_key_average: bool | None = None,
                   messages: Sequence[int] | None = None,
                   keep_traces: bool = True) -> ErrorEstimate:
    """Max-over-messages Monte Carlo failure estimate with a Wilson interval.

    Runs `trials` sessions for each sampled message. With exact key
    averaging (default when K <= 64) every trial runs once per key at a
    fixed jam/noise draw and contributes the failing fraction, which is
    exact in the key coordinate; the Wilson interval then reads the
    fractional failure total as a count, which is exact for
    deterministic channels and conservative in spirit otherwise.
    Results are bit-identical for any `workers` split.
    """
    rt = _runtime_for(spec)
    if exact_key_average is None:
        exact_key_average = spec.family.K <= 64
    if messages is None:
        space = rt.message_space()
        mrng = _role_py(derive_trial_seed(seed, 0, 0), _ROLE_MESSAGE)
        messages = [mrng.randrange(space) for _ in range(messages_sampled)]
    else:
        messages = [int(m) for m in messages]
        messages_sampled = len(messages)

    per_message = []
    all_traces: list[SessionTrace] = []
    for slot, message in enumerate(messages):
        if workers <= 1:
            fails, traces = _run_batch(
                (spec, message, slot, 0, trials, seed, exact_key_average, keep_traces))
        else:
            step = max(1, trials // (workers * 4))
            batches = [
                (spec, message, slot, lo, min(lo + step, trials), seed,
                 exact_key_average, keep_traces)
                for lo in range(0, trials, step)
            ]
            fails = 0.0
            traces = []
            with ProcessPoolExecutor(max_workers=workers) as pool:
                for bf, bt in pool.map(_run_batch, batches):
                    fails += bf
                    traces.extend(bt)
        per_message.append((message, trials, fails))
        all_traces.extend(traces)

    rates = [f / t for (_m, t, f) in per_message]
    best = max(range(len(rates)), key=lambda i: rates[i])
    lo, hi = wilson_interval(per_message[best][2], per_message[best][1])
    return ErrorEstimate(
        per_message=tuple(per_message), point=rates[best], wilson_lo=lo,
        wilson_hi=hi, argmax_message=per_message[best][0],
        trials_per_message=trials, traces=all_traces)


ENUM_STATE_CAP = 10 ** 6
ENUM_OUTPUT_CAP = 4096


@dataclass
class BruteForceResult:
    criterion: str                 # "standard" or "nosy"
    max_error: float
    argmax_message: int
    worst_state: tuple[int, ...] | None
    per_message: tuple[float, ...]


def brute_force_max_error(spec: SessionSpec, criterion: str = "standard") -> BruteForceResult:
    """Exact maximal decoding error by full enumeration (tiny blocks only).

    Standard: the state sequence is chosen blind, so the adversary picks
    one admissible s maximizing the key-averaged error for the worst
    message. Nosy: the choice may depend on the transmitted codeword, so
    the maximum moves inside the key average (grouped by codeword value,
    which is what the choice can see).
    """
    if criterion not in ("standard", "nosy"):
        raise ValueError("criterion must be 'standard' or 'nosy'")
    avc, fam = spec.avc, spec.family
    n = spec.n
    ns, ny = avc.num_states, avc.num_outputs
    if ns ** n > ENUM_STATE_CAP:
        raise ValueError("state space too large for enumeration")
    if ny ** n > ENUM_OUTPUT_CAP:
        raise ValueError("output space too large for enumeration")

    states = [
        s for s in np.ndindex(*([ns] * n))
        if admissible(avc, np.array(s), spec.Lambda)
    ]
    outputs = [np.array(yt, dtype=np.int64) for yt in np.ndindex(*([ny] * n))]
    books = [fam.member(k) for k in range(fam.K)]
    decode_cache: dict[tuple[int, bytes], int | None] = {}

    def decoded_index(k: int, y: np.ndarray) -> int | None:
        key = (k, y.tobytes())
        if key not in decode_cache:
            decode_cache[key] = mmi_decode(books[k], y, ny).message
        return decode_cache[key]

    def err_prob(k: int, i: int, s: np.ndarray) -> float:
        x = books[k].codeword(i)
        total = 0.0
        for y in outputs:
            p = float(np.prod(avc.W[s, x, y]))
            if p > 0.0 and decoded_index(k, y) != i:
                total += p
        return total

    per_message = []
    best_val = -1.0
    best_msg = 0
    worst_state: tuple[int, ...] | None = None
    for i in range(fam.N):
        if criterion == "standard":
            val = -1.0
            arg = None
            for s in states:
                sv = np.array(s, dtype=np.int64)
                avg = sum(err_prob(k, i, sv) for k in range(fam.K)) / fam.K
                if avg > val:
                    val, arg = avg, s
            if val > best_val:
                best_val, best_msg = val, i
                worst_state = tuple(int(v) for v in arg) if arg is not None else None
        else:
            # The state choice sees the codeword, not the key, so keys
            # sharing a codeword share the state; within each group the
            # adversary maximizes the group-averaged error.
            groups: dict[bytes, list[int]] = {}
            for k in range(fam.K):
                groups.setdefault(books[k].codeword(i).tobytes(), []).append(k)
            total = 0.0
            for keys in groups.values():
                total += max(
                    sum(err_prob(k, i, np.array(s, dtype=np.int64)) for k in keys)
                    for s in states)
            val = total / fam.K
            if val > best_val:
                best_val, best_msg = val, i
                worst_state = None
        per_message.append(val)
    return BruteForceResult(
        criterion=criterion, max_error=best_val, argmax_message=best_msg,
        worst_state=worst_state, per_message=tuple(per_message))


@dataclass
class DecodeTimeAudit:
    checked: int
    mismatches: tuple[int, ...]          # trace indices whose rule recompute differs
    bracket_violations: tuple[int, ...]  # decode time outside the true-value bracket
    csi_contract_failures: tuple[int, ...]
    brackets: tuple[tuple[int | None, int | None, int | None], ...]


def _first_fire(rate_of_m, threshold_of_m, M_lo: int, M_hi: int) -> int | None:
    for m in range(M_lo, M_hi + 1):
        if rate_of_m(m) < threshold_of_m(m):
            return m
    return None


def audit_decoding_time(spec: SessionSpec, traces: Sequence[SessionTrace]) -> DecodeTimeAudit:
    """Replay each trace's stopping rule from regenerated inputs.

    Two layers: the firing rule recomputed from regenerated side
    information must match the trace exactly (mismatches are bugs), and
    the decode time must land inside the bracket implied by the true
    state costs or true chunk channels given the side-information slack
    (violations mean the rule and its inputs disagree beyond contract).
    """
    rt = _runtime_for(spec)
    fam = spec.family
    c = rt.c
    mismatches = []
    brackets = []
    bracket_violations = []
    csi_failures = []
    for idx, tr in enumerate(traces):
        cb = rt.book(tr.key, False)
        x = cb.codeword(tr.index)
        s = jam(spec.avc, spec.strategy, x, spec.n, spec.Lambda,
                _role_seed(tr.trial_seed, _ROLE_JAM), P=rt.P)
        rate = lambda m: rt.log2_N / (m * c)
        if spec.mode == "std":
            report = make_cost_csi(spec.avc, s, c, spec.csi_epsilon,
                                   _role_seed(tr.trial_seed, _ROLE_CSI))
            est = np.array(report.cost_estimates)
            true_costs = spec.avc.cost[s].reshape(fam.M_hi, c).mean(axis=1)
            # Exact side information reproduces the true costs verbatim;
            # noisy estimates can additionally overshoot by half a grid gap.
            eps_eff = 0.0 if spec.csi_epsilon == 0 else spec.csi_epsilon + rt.grid_halfgap
            if (est < true_costs - 1e-9).any() or (est > true_costs + eps_eff + 1e-9).any():
                csi_failures.append(idx)
                continue
            recomputed = _first_fire(
                rate,
                lambda m: rt.std_cache.value(float(est[:m].mean())) - spec.delta,
                fam.M_lo, fam.M_hi)
            means = np.cumsum(true_costs) / np.arange(1, fam.M_hi + 1)
            lo_b = _first_fire(
                rate, lambda m: rt.std_cache.value(float(means[m - 1])) - spec.delta,
                fam.M_lo, fam.M_hi)
            hi_b = _first_fire(
                rate,
                lambda m: rt.std_cache.value(float(means[m - 1]) + eps_eff) - spec.delta,
                fam.M_lo, fam.M_hi)
        else:
            y = sample_outputs(spec.avc, x, s,
                               _role_rng(tr.trial_seed, _ROLE_CHANNEL))
            stream = ChannelCsiStream(
                spec.avc, c, rt.P, spec.eps, _role_seed(tr.trial_seed, _ROLE_CSI),
                max_set=spec.csi_max_set, cost_cap=spec.csi_cost_cap,
                pool_size=spec.csi_pool, attempts=spec.csi_attempts)
            mi_mins: list[float | None] = []
            sum_true = 0.0
            recomputed = None
            lo_b = None
            hi_b = None
            for m in range(1, fam.M_hi + 1):
                sl = slice((m - 1) * c, m * c)
                members, true_val = stream.next_chunk(x[sl], s[sl])
                sum_true += true_val
                y_freq = np.bincount(y[sl], minlength=spec.avc.num_outputs) / c
                kept = [mutual_information(rt.P, V.w) for V in members
                        if variational_distance(y_freq, rt.P @ V.w) < spec.delta_filter]
                mi_mins.append(min(kept) if kept else None)
                if recomputed is None and m >= fam.M_lo and \
                        tau_dep(m, fam.N, c, mi_mins, spec.eps):
                    recomputed = m
                if m >= fam.M_lo:
                    avg_true = sum_true / m
                    if lo_b is None and rate(m) < avg_true - spec.eps:
                        lo_b = m
                    if hi_b is None and rate(m) < avg_true - 2 * spec.eps:
                        hi_b = m
                # all three markers found; later chunks cannot change them
                if recomputed is not None and lo_b is not None and hi_b is not None:
                    break
        brackets.append((tr.decode_time, lo_b, hi_b))
        if recomputed != tr.decode_time and not tr.forced:
            mismatches.append(idx)
        if tr.decode_time is not None and not tr.forced:
            below = lo_b is None or tr.decode_time < lo_b
            above = hi_b is not None and tr.decode_time > hi_b
            if below or above:
                bracket_violations.append(idx)
    return DecodeTimeAudit(
        checked=len(traces), mismatches=tuple(mismatches),
        bracket_violations=tuple(bracket_violations),
        csi_contract_failures=tuple(csi_failures), brackets=tuple(brackets))


@dataclass
class ListSizeAudit:
    trials: int
    max_list: int
    bound: int
    sizes: tuple[tuple[int, int], ...]   # (size, count) histogram
    within_bound: bool


def audit_list_sizes(spec: SessionSpec, trials: int, messages_sampled: int,
                     seed: int, workers: int = 1) -> ListSizeAudit:
    """Observed decode-list sizes against the epsilon-driven cap."""
    if spec.mode != "dep":
        raise ValueError("list sizes apply to dep sessions")
    est = estimate_error(spec, trials, messages_sampled, seed,
                         workers=workers, exact_key_average=False)
    sizes = [tr.list_size for tr in est.traces if tr.list_size is not None]
    bound = math.ceil(12 * math.log2(spec.avc.num_outputs) / spec.eps)
    hist: dict[int, int] = {}
    for v in sizes:
        hist[v] = hist.get(v, 0) + 1
    max_list = max(sizes) if sizes else 0
    return ListSizeAudit(
        trials=len(sizes), max_list=max_list, bound=bound,
        sizes=tuple(sorted(hist.items())), within_bound=max_list <= bound)
