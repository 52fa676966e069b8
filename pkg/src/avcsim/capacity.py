"""Saddle-point capacity solvers for costed state channels.

Two hulls are covered. The input-blind hull averages the state family
under a distribution Q on states with Q . cost <= Lambda. The
input-aware hull averages each input row separately under a kernel
U(s|x) with the P-weighted cost bounded by Lambda. Capacity is the max
over input distributions of the min over the hull, in bits.

The inner minimum is a convex program. For two states it reduces to a
line (or nested line) search and is solved by golden section; otherwise
projected gradient descent with Armijo backtracking does the work, with
the vertices of the constraint polytope used as starting points. The
outer maximum runs a simplex grid followed by pairwise mass-transfer
refinement, which is safe because the inner minimum is concave in P.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .alphabet import InputDistribution, binary_entropy, iter_compositions, mutual_information
from .avc import Avc

_LOG_CLAMP = 1e-30
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class SolverError(RuntimeError):
    """Raised when an inner solve fails to converge; carries the best iterate."""

    def __init__(self, message: str, best_value: float, best_point: np.ndarray):
        super().__init__(message)
        self.best_value = best_value
        self.best_point = best_point


@dataclass
class SaddleResult:
    """Outcome of a capacity computation.

    `minimizer` is the worst-case mixing weight: a state distribution for
    the input-blind hull, a per-input kernel for the input-aware one.
    The gaps are convergence diagnostics (last-improvement magnitudes),
    not certified bounds.
    """

    value: float
    P_star: np.ndarray
    minimizer: np.ndarray
    inner_gap: float
    outer_gap: float


# ---------------------------------------------------------------------------
# projections
# ---------------------------------------------------------------------------


def _project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = idx[u - css / idx > 0][-1]
    theta = css[rho - 1] / rho
    return np.clip(v - theta, 0.0, None)


def _project_simplex_rows(V: np.ndarray) -> np.ndarray:
    """Row-wise simplex projection; same arithmetic as the single-row
    version, batched so kernel projections stay off the Python heap."""
    u = -np.sort(-V, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    idx = np.arange(1, V.shape[1] + 1)
    mask = u - css / idx > 0
    # the first column of mask is always true, so argmax on the reversed
    # rows finds the last true entry
    rho0 = V.shape[1] - 1 - np.argmax(mask[:, ::-1], axis=1)
    theta = css[np.arange(V.shape[0]), rho0] / (rho0 + 1)
    return np.clip(V - theta[:, None], 0.0, None)


def _project_capped_simplex(v: np.ndarray, cost: np.ndarray, budget: float) -> np.ndarray:
    """Project onto {q on the simplex : q . cost <= budget}.

    The budgeted projection is the simplex projection of v - mu * cost
    for the smallest mu >= 0 restoring feasibility; q(mu) . cost is
    nonincreasing in mu, so bisection applies.
    """
    q = _project_simplex(v)
    if float(q @ cost) <= budget + 1e-12:
        return q
    hi = 1.0
    while float(_project_simplex(v - hi * cost) @ cost) > budget:
        hi *= 2.0
        if hi > 1e18:
            raise RuntimeError("budgeted projection failed to bracket")
    lo = 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if float(_project_simplex(v - mid * cost) @ cost) > budget:
            lo = mid
        else:
            hi = mid
    return _project_simplex(v - hi * cost)


def _project_kernel(Vmat: np.ndarray, p: np.ndarray, cost: np.ndarray, budget: float) -> np.ndarray:
    """Project a |X| x |S| matrix onto row simplices with the P-weighted
    cost bounded by `budget`."""

    def rows_at(mu: float) -> np.ndarray:
        return _project_simplex_rows(Vmat - mu * np.outer(p, cost))

    def weighted_cost(rows: np.ndarray) -> float:
        return float(p @ (rows @ cost))

    rows = rows_at(0.0)
    if weighted_cost(rows) <= budget + 1e-12:
        return rows
    hi = 1.0
    while weighted_cost(rows_at(hi)) > budget:
        hi *= 2.0
        if hi > 1e18:
            raise RuntimeError("kernel projection failed to bracket")
    lo = 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if weighted_cost(rows_at(mid)) > budget:
            lo = mid
        else:
            hi = mid
    return rows_at(hi)


# ---------------------------------------------------------------------------
# line searches
# ---------------------------------------------------------------------------


def _golden_min(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200):
    """Minimize a unimodal f on [lo, hi]; returns (argmin, min)."""
    if hi - lo <= tol:
        mid = 0.5 * (lo + hi)
        return mid, f(mid)
    a, b = lo, hi
    x1 = b - _INVPHI * (b - a)
    x2 = a + _INVPHI * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INVPHI * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INVPHI * (b - a)
            f2 = f(x2)
    # include the endpoints, which golden section never samples exactly
    cands = [(f(a), a), (f1, x1), (f2, x2), (f(b), b)]
    best = min(cands, key=lambda t: t[0])
    return best[1], best[0]


def _pgd_min(f, grad, project, x0: np.ndarray, max_iter: int = 4000, step_tol: float = 1e-10,
             f_tol: float = 0.0, patience: int = 0):
    """Projected gradient descent with Armijo backtracking.

    Returns (x, f(x), last_step_norm). Raises SolverError if the
    iteration cap is hit while steps are still large.

    With `patience` set, the loop also stops after that many consecutive
    iterations whose objective gain stays below `f_tol`. Step norms can
    stay large while the iterate wanders along a flat face of the
    feasible polytope, so a value-based stop is what actually ends those
    runs; callers pick f_tol from the precision they need.
    """
    x = project(np.asarray(x0, dtype=float))
    fx = f(x)
    t = 1.0
    last_step = math.inf
    stall = 0
    for _ in range(max_iter):
        g = grad(x)
        while True:
            x_new = project(x - t * g)
            d = x_new - x
            quad = float(np.vdot(g, d)) + 0.5 / t * float(np.vdot(d, d))
            f_new = f(x_new)
            if f_new <= fx + quad + 1e-14 or t < 1e-16:
                break
            t *= 0.5
        last_step = float(np.sqrt(np.vdot(d, d)))
        gain = fx - f_new
        if f_new <= fx:
            x, fx = x_new, f_new
        if last_step < step_tol:
            return x, fx, last_step
        if patience > 0:
            stall = stall + 1 if gain < f_tol else 0
            if stall >= patience:
                return x, fx, last_step
        t = min(t * 1.25, 64.0)
    if last_step > 1e-5:
        raise SolverError("projected gradient did not converge", fx, x)
    return x, fx, last_step


# ---------------------------------------------------------------------------
# inner minimizations
# ---------------------------------------------------------------------------


def _as_probs(P) -> np.ndarray:
    return P.p if isinstance(P, InputDistribution) else np.asarray(P, dtype=float)


def _mi_fast(p: list[float], rows: list[list[float]]) -> float:
    """Plain-Python mutual information for tiny alphabets.

    The line searches below evaluate I tens of thousands of times on
    2x2 or 3x3 matrices, where numpy call overhead dominates; loops over
    floats are an order of magnitude faster at these sizes.
    """
    ny = len(rows[0])
    out = [0.0] * ny
    for px, row in zip(p, rows):
        if px > 0.0:
            for y in range(ny):
                out[y] += px * row[y]
    val = 0.0
    log2 = math.log2
    for px, row in zip(p, rows):
        if px > 0.0:
            for y in range(ny):
                v = row[y]
                if v > 0.0:
                    val += px * v * log2(v / out[y])
    return val if val > 0.0 else 0.0


def _std_value(avc: Avc, p: np.ndarray, Q: np.ndarray) -> float:
    return mutual_information(p, np.tensordot(Q, avc.W, axes=(0, 0)))


def _std_grad(avc: Avc, p: np.ndarray, Q: np.ndarray) -> np.ndarray:
    V = np.tensordot(Q, avc.W, axes=(0, 0))
    out = p @ V
    L = np.log2(np.clip(V, _LOG_CLAMP, None) / np.clip(out, _LOG_CLAMP, None)[None, :])
    return np.einsum("x,sxy,xy->s", p, avc.W, L)


def _dep_value(avc: Avc, p: np.ndarray, U: np.ndarray) -> float:
    V = np.einsum("xs,sxy->xy", U, avc.W)
    return mutual_information(p, V)


def _dep_grad(avc: Avc, p: np.ndarray, U: np.ndarray) -> np.ndarray:
    V = np.einsum("xs,sxy->xy", U, avc.W)
    out = p @ V
    L = np.log2(np.clip(V, _LOG_CLAMP, None) / np.clip(out, _LOG_CLAMP, None)[None, :])
    return p[:, None] * np.einsum("sxy,xy->xs", avc.W, L)


def _two_state_interval(c0: float, c1: float, budget: float) -> tuple[float, float]:
    """Feasible mixing weights q on state 1 when (1-q) c0 + q c1 <= budget."""
    budget = max(budget, 0.0)
    if c1 > c0:
        if budget < c0:
            return 0.0, 0.0
        return 0.0, min(1.0, (budget - c0) / (c1 - c0))
    if c1 < c0:
        lo = 0.0 if budget >= c0 else (c0 - budget) / (c0 - c1)
        return min(lo, 1.0), 1.0
    return (0.0, 1.0) if c0 <= budget else (0.0, 0.0)


def _std_vertices(avc: Avc, budget: float) -> list[np.ndarray]:
    verts = []
    ns = avc.num_states
    for s in range(ns):
        if avc.cost[s] <= budget + 1e-12:
            e = np.zeros(ns)
            e[s] = 1.0
            verts.append(e)
    for i in range(ns):
        for j in range(ns):
            ci, cj = avc.cost[i], avc.cost[j]
            if ci < budget < cj:
                t = (budget - ci) / (cj - ci)
                v = np.zeros(ns)
                v[i], v[j] = 1.0 - t, t
                verts.append(v)
    return verts


def min_mi_std(
    avc: Avc, P, Lambda: float, tol: float = 1e-6,
    Q0: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Minimum of I(P, .) over the input-blind hull at budget Lambda.

    Returns (value, Q_star). Convex in Q, so two states go through golden
    section on the feasible segment and larger state alphabets through
    projected gradient descent seeded at the best polytope vertex. `Q0`
    warm-starts the gradient path; convexity makes one good start as
    reliable as the vertex sweep.
    """
    p = _as_probs(P)
    if Lambda < 0.0:
        raise ValueError("budget must be nonnegative")
    if avc.num_states == 2:
        lo, hi = _two_state_interval(avc.cost[0], avc.cost[1], Lambda)
        p_list = p.tolist()
        W0 = avc.W[0].tolist()
        W1 = avc.W[1].tolist()
        nx, ny = avc.num_inputs, avc.num_outputs

        def on_seg(q):
            rows = [
                [(1.0 - q) * W0[x][y] + q * W1[x][y] for y in range(ny)] for x in range(nx)
            ]
            return _mi_fast(p_list, rows)

        # argument precision w gives value precision ~ w^2 via curvature
        q_star, val = _golden_min(on_seg, lo, hi, tol=_arg_tol(tol))
        return val, np.array([1.0 - q_star, q_star])

    if Q0 is not None:
        starts = [_project_capped_simplex(np.asarray(Q0, dtype=float), avc.cost, Lambda)]
    else:
        starts = _std_vertices(avc, Lambda)
        starts.sort(key=lambda Q: _std_value(avc, p, Q))
        starts = starts[:2] + [_project_capped_simplex(np.full(avc.num_states, 1.0 / avc.num_states), avc.cost, Lambda)]
    best_val, best_Q, = math.inf, None
    for Q0 in starts:
        Q, val, _ = _pgd_min(
            lambda Q: _std_value(avc, p, Q),
            lambda Q: _std_grad(avc, p, Q),
            lambda Q: _project_capped_simplex(Q, avc.cost, Lambda),
            Q0,
            f_tol=max(1e-12, 1e-3 * tol),
            patience=8,
        )
        if val < best_val:
            best_val, best_Q = val, Q
    return best_val, best_Q


def _arg_tol(value_tol: float) -> float:
    """Line-search interval width whose induced value error stays below
    value_tol for O(1) curvature."""
    return max(1e-11, min(1e-4, 0.1 * math.sqrt(max(value_tol, 1e-16))))


def _kernel_rows(W0, W1, q: list[float], ny: int) -> list[list[float]]:
    return [
        [(1.0 - qx) * w0[y] + qx * w1[y] for y in range(ny)]
        for qx, w0, w1 in zip(q, W0, W1)
    ]


def _dep_min_nested_two_state(avc: Avc, p: np.ndarray, Lambda: float, tol: float = 1e-6):
    """Exact nested line search for two inputs and two states.

    The partial minimum over the second row's mixing weight is convex in
    the first row's weight, so golden section at both levels finds the
    global minimum of the jointly convex objective.
    """
    c0, c1 = float(avc.cost[0]), float(avc.cost[1])
    p_list = p.tolist()
    W0 = avc.W[0].tolist()
    W1 = avc.W[1].tolist()
    ny = avc.num_outputs
    outer_tol = _arg_tol(tol)
    inner_tol = max(1e-11, outer_tol * 1e-2)

    def mix_cost(q):
        return (1.0 - q) * c0 + q * c1

    def solve_row1(q0):
        budget1 = max(Lambda - p_list[0] * mix_cost(q0), 0.0)
        if p_list[1] <= 0.0:
            zero = 0.0 if c0 <= c1 else 1.0
            return zero, _mi_fast(p_list, _kernel_rows(W0, W1, [q0, zero], ny))
        lo, hi = _two_state_interval(c0, c1, budget1 / p_list[1])

        def inner(q1):
            return _mi_fast(p_list, _kernel_rows(W0, W1, [q0, q1], ny))

        return _golden_min(inner, lo, hi, tol=inner_tol)

    if p_list[0] <= 0.0:
        q0_lo, q0_hi = 0.0, 1.0
    else:
        q0_lo, q0_hi = _two_state_interval(c0, c1, Lambda / p_list[0])

    q0_star, val = _golden_min(lambda q0: solve_row1(q0)[1], q0_lo, q0_hi, tol=outer_tol)
    q1_star = solve_row1(q0_star)[0]
    U = np.array([[1 - q0_star, q0_star], [1 - q1_star, q1_star]])
    return val, U


def _dep_min_cd_two_state(avc: Avc, p: np.ndarray, Lambda: float, tol: float = 1e-6):
    """Coordinate descent over per-row mixing weights for two states.

    Each input row mixes the two states with weight q_x on state 1, and
    the budget couples rows only through the scalar sum p . q. Sweeps
    alternate single-coordinate golden searches with budget-preserving
    pair transfers, which together span every feasible edge direction, so
    descent cannot stall on the coupling constraint. Two starts guard
    against boundary kinks of the objective.
    """
    nx, ny = avc.num_inputs, avc.num_outputs
    c0, c1 = float(avc.cost[0]), float(avc.cost[1])
    gamma = c1 - c0
    p_list = p.tolist()
    W0 = avc.W[0].tolist()
    W1 = avc.W[1].tolist()

    def value(q):
        return _mi_fast(p_list, _kernel_rows(W0, W1, q, ny))

    zero_q = 0.0 if c0 <= c1 else 1.0
    starts = [[zero_q] * nx]
    if gamma > 0:
        u = min(1.0, max(0.0, (Lambda - c0) / gamma))
        starts.append([u] * nx)
    elif gamma < 0:
        u = min(1.0, max(0.0, (c0 - Lambda) / -gamma))
        starts.append([u] * nx)
    else:
        starts.append([0.5] * nx)

    line_tol = _arg_tol(tol)
    sweep_stop = max(1e-13, tol * 1e-4)
    best_val, best_q = math.inf, None
    for q in starts:
        q = list(q)
        fq = value(q)
        for _ in range(60):
            before = fq
            # single-coordinate moves (may change the budget use)
            for x in range(nx):
                if p_list[x] <= 0.0:
                    q[x] = zero_q
                    continue
                s_other = sum(p_list[i] * q[i] for i in range(nx) if i != x)
                if gamma == 0.0:
                    lo, hi = 0.0, 1.0
                else:
                    bound = (Lambda - c0 - gamma * s_other) / (gamma * p_list[x])
                    if gamma > 0:
                        lo, hi = 0.0, min(1.0, max(bound, 0.0))
                    else:
                        lo, hi = max(0.0, min(bound, 1.0)), 1.0

                def on_coord(t, x=x):
                    trial = q.copy()
                    trial[x] = t
                    return value(trial)

                t_star, f_star = _golden_min(on_coord, lo, hi, tol=line_tol)
                if f_star < fq:
                    q[x], fq = t_star, f_star
            # pair transfers along the budget-preserving direction
            for i in range(nx):
                for j in range(i + 1, nx):
                    pi, pj = p_list[i], p_list[j]
                    if pi <= 0.0 or pj <= 0.0:
                        continue
                    t_lo = max(-q[i] * pi, (q[j] - 1.0) * pj)
                    t_hi = min((1.0 - q[i]) * pi, q[j] * pj)
                    if t_hi - t_lo <= 1e-14:
                        continue

                    def on_pair(t, i=i, j=j, pi=pi, pj=pj):
                        trial = q.copy()
                        trial[i] = min(1.0, max(0.0, q[i] + t / pi))
                        trial[j] = min(1.0, max(0.0, q[j] - t / pj))
                        return value(trial)

                    t_star, f_star = _golden_min(on_pair, t_lo, t_hi, tol=line_tol)
                    if f_star < fq:
                        q[i] = min(1.0, max(0.0, q[i] + t_star / pi))
                        q[j] = min(1.0, max(0.0, q[j] - t_star / pj))
                        fq = f_star
            if before - fq < sweep_stop:
                break
        if fq < best_val:
            best_val, best_q = fq, q
    U = np.array([[1.0 - qx, qx] for qx in best_q])
    return best_val, U


def _dep_vertices(avc: Avc, p: np.ndarray, budget: float) -> list[np.ndarray]:
    """Pure state assignments per input row, budget-filtered, plus single
    boundary mixes; used as PGD starting points."""
    nx, ns = avc.num_inputs, avc.num_states
    verts = []
    for assign in itertools.product(range(ns), repeat=nx):
        cost = float(sum(p[x] * avc.cost[s] for x, s in enumerate(assign)))
        if cost <= budget + 1e-12:
            U = np.zeros((nx, ns))
            for x, s in enumerate(assign):
                U[x, s] = 1.0
            verts.append(U)
    return verts


def min_mi_dep(
    avc: Avc, P, Lambda: float, tol: float = 1e-6,
    U0: np.ndarray | None = None,
) -> tuple[float, np.ndarray]:
    """Minimum of I(P, .) over the input-aware hull at budget Lambda.

    Returns (value, U_star) with U_star of shape (|X|, |S|). The binary
    input, binary state case runs a nested golden section over the per-row
    mixing weights; it is exact up to line-search precision and fast
    enough for grid outer loops.

    `U0` warm-starts the gradient path used for three or more states.
    The objective is convex in U (the induced channel is affine in U and
    mutual information is convex in the channel), so a single warm start
    reaches the same minimum as the default multi-start sweep.
    """
    p = _as_probs(P)
    if Lambda < 0.0:
        raise ValueError("budget must be nonnegative")
    nx, ns = avc.num_inputs, avc.num_states
    if p.shape[0] != nx:
        raise ValueError("P does not match the channel input alphabet")

    if ns == 2:
        if nx == 2:
            return _dep_min_nested_two_state(avc, p, Lambda, tol)
        return _dep_min_cd_two_state(avc, p, Lambda, tol)

    if U0 is not None:
        starts = [_project_kernel(np.asarray(U0, dtype=float), p, avc.cost, Lambda)]
    else:
        starts = _dep_vertices(avc, p, Lambda)
        starts.sort(key=lambda U: _dep_value(avc, p, U))
        uniform = np.full((nx, ns), 1.0 / ns)
        starts = starts[:3] + [_project_kernel(uniform, p, avc.cost, Lambda)]
    best_val, best_U = math.inf, None
    for U0 in starts:
        U, val, _ = _pgd_min(
            lambda U: _dep_value(avc, p, U),
            lambda U: _dep_grad(avc, p, U),
            lambda U: _project_kernel(U, p, avc.cost, Lambda),
            U0,
            f_tol=max(1e-12, 1e-3 * tol),
            patience=8,
        )
        if val < best_val:
            best_val, best_U = val, U
    return best_val, best_U


def min_mi_std_restricted(
    avc: Avc,
    P,
    Lambda: float,
    y_freq: np.ndarray,
    delta_out: float,
    tol: float = 1e-6,
) -> tuple[float, np.ndarray | None]:
    """Input-blind hull minimum restricted to mixes whose output law lies
    within total variation `delta_out` of an observed output type.

    Returns (value, Q_star), or (inf, None) when no admissible mix is
    consistent with the observation; the caller decides what an empty
    restriction means. The extra constraint set is the intersection of
    2^|Y| halfspaces (one per sign pattern of the L1 ball), handled by
    Dykstra's alternating projections inside the gradient loop.
    """
    p = _as_probs(P)
    t_obs = np.asarray(y_freq, dtype=float)
    ny = avc.num_outputs
    if t_obs.shape != (ny,):
        raise ValueError("observed output type has the wrong length")
    A = np.einsum("x,sxy->ys", p, avc.W)
    signs = list(itertools.product((-1.0, 1.0), repeat=ny))
    normals = [np.asarray(s) @ A for s in signs]
    offsets = [2.0 * delta_out + float(np.asarray(s) @ t_obs) for s in signs]

    def proj_half(x, a, b):
        sq = float(a @ a)
        if sq <= 0.0:
            return x
        excess = float(a @ x) - b
        if excess <= 0.0:
            return x
        return x - (excess / sq) * a

    def project(v):
        x = np.asarray(v, dtype=float)
        mem = [np.zeros_like(x) for _ in range(1 + len(normals))]
        for _ in range(80):
            y = _project_capped_simplex(x + mem[0], avc.cost, Lambda)
            mem[0] = x + mem[0] - y
            x = y
            for i, (a, b) in enumerate(zip(normals, offsets), start=1):
                y = proj_half(x + mem[i], a, b)
                mem[i] = x + mem[i] - y
                x = y
        return x

    def feasible(Q):
        if np.any(Q < -1e-7) or abs(Q.sum() - 1.0) > 1e-7:
            return False
        if float(Q @ avc.cost) > Lambda + 1e-7:
            return False
        tv = 0.5 * float(np.abs(A @ Q - t_obs).sum())
        return tv <= delta_out + 1e-7

    start = project(np.full(avc.num_states, 1.0 / avc.num_states))
    if not feasible(start):
        return math.inf, None
    Q, val, _ = _pgd_min(
        lambda Q: _std_value(avc, p, Q),
        lambda Q: _std_grad(avc, p, Q),
        project,
        start,
        max_iter=1500,
    )
    return val, Q


# ---------------------------------------------------------------------------
# outer maximization
# ---------------------------------------------------------------------------


def _simplex_grid(nx: int, step: float):
    k = max(1, round(1.0 / step))
    for comp in iter_compositions(k, nx):
        yield np.asarray(comp, dtype=float) / k


def _refine_outer(phi, p0: np.ndarray, value0: float, passes: int = 6):
    """Pairwise mass-transfer ascent from a grid optimum.

    phi is concave along every transfer segment (it is a min of functions
    concave in P), so golden section per segment is safe.
    """
    p = p0.copy()
    best = value0
    last_gain = 0.0
    for _ in range(passes):
        improved = False
        for i in range(p.size):
            for j in range(p.size):
                if i == j or p[i] <= 1e-12:
                    continue
                direction = np.zeros_like(p)
                direction[i], direction[j] = -1.0, 1.0

                def neg(t):
                    return -phi(p + t * direction)

                t_star, neg_val = _golden_min(neg, 0.0, float(p[i]), tol=3e-5)
                if -neg_val > best + 1e-12:
                    last_gain = -neg_val - best
                    best = -neg_val
                    p = p + t_star * direction
                    improved = True
        if not improved:
            break
    return best, p, last_gain


def _capacity(avc: Avc, Lambda: float, tol: float, inner, fine_grid: bool) -> SaddleResult:
    nx = avc.num_inputs
    memo: dict[tuple[bytes, float], float] = {}

    def phi_at(p, inner_tol):
        p = np.clip(p, 0.0, None)
        p = p / p.sum()
        key = (p.tobytes(), inner_tol)
        hit = memo.get(key)
        if hit is None:
            hit = memo[key] = inner(avc, p, Lambda, inner_tol)[0]
        return hit

    def phi(p):
        return phi_at(p, tol)

    coarse = max(tol, 1e-4)
    step = 0.05 if fine_grid else 0.1
    best_val, best_p = -math.inf, None
    for p in _simplex_grid(nx, step):
        v = phi_at(p, coarse)
        if v > best_val:  # strict, so the first (lexicographic) maximizer is kept
            best_val, best_p = v, p
    # re-evaluate the grid winner at full precision before refining
    best_val = phi(best_p)
    value, P_star, outer_gap = _refine_outer(phi, best_p, best_val)
    inner_val, minimizer = inner(avc, P_star, Lambda, tol)
    value = max(value, inner_val)
    cap = math.log2(nx)
    if not (-1e-9 <= value <= cap + 1e-9):
        raise RuntimeError(f"capacity {value!r} escaped [0, log2 |X|]")
    return SaddleResult(
        value=float(min(max(value, 0.0), cap)),
        P_star=P_star,
        minimizer=minimizer,
        inner_gap=abs(value - inner_val),
        outer_gap=outer_gap,
    )


def capacity_std(avc: Avc, Lambda: float, tol: float = 1e-6) -> SaddleResult:
    """max over P of the input-blind hull minimum, in bits."""
    carry: dict[str, np.ndarray | None] = {"Q": None}

    def inner(avc_, p, lam, inner_tol):
        value, Q = min_mi_std(avc_, p, lam, inner_tol, Q0=carry["Q"])
        carry["Q"] = Q
        return value, Q

    return _capacity(avc, Lambda, tol, inner, fine_grid=avc.num_inputs <= 3)


def capacity_dep(avc: Avc, Lambda: float, tol: float = 1e-6) -> SaddleResult:
    """max over P of the input-aware hull minimum, in bits."""
    carry: dict[str, np.ndarray | None] = {"U": None}

    def inner(avc_, p, lam, inner_tol):
        value, U = min_mi_dep(avc_, p, lam, inner_tol, U0=carry["U"])
        carry["U"] = U
        return value, U

    return _capacity(avc, Lambda, tol, inner, fine_grid=avc.num_inputs == 2)


# ---------------------------------------------------------------------------
# closed forms for the bundled presets
# ---------------------------------------------------------------------------


def closed_form_bitflip(Lambda: float) -> float:
    """Capacity of the flip channel with budget Lambda, either hull."""
    if Lambda < 0.0 or Lambda > 1.0:
        raise ValueError("budget outside [0, 1]")
    if Lambda >= 0.5:
        return 0.0
    return 1.0 - binary_entropy(Lambda)


def closed_form_realadder_dep(Lambda: float) -> float:
    """Input-aware hull capacity of the adder channel, budget in [0, 1]."""
    if Lambda < 0.0 or Lambda > 1.0:
        raise ValueError("budget outside [0, 1]")
    if Lambda >= 1.0:
        return 0.0
    return binary_entropy((1.0 - Lambda) / 2.0) - ((1.0 + Lambda) / 2.0) * binary_entropy(
        2.0 * Lambda / (1.0 + Lambda)
    )


# ---------------------------------------------------------------------------
# memoized inner minimum for decode-threshold loops
# ---------------------------------------------------------------------------


class CachedStdMin:
    """Memoizes min_mi_std values across repeated budget queries.

    Budgets coming from quantized cost estimates form a small set, so a
    dict keyed on the rounded budget makes per-chunk threshold checks
    cheap inside long sessions.
    """

    def __init__(self, avc: Avc, P, tol: float = 1e-8):
        self.avc = avc
        self.p = _as_probs(P).copy()
        self.tol = tol
        self._memo: dict[float, float] = {}

    def value(self, Lambda: float) -> float:
        key = round(float(Lambda), 9)
        hit = self._memo.get(key)
        if hit is None:
            hit = min_mi_std(self.avc, self.p, max(key, 0.0), self.tol)[0]
            self._memo[key] = hit
        return hit
