"""Policy evaluation, trajectory simulation, entry times, and belief breakpoints.

The greedy policy value is computed by unrolling the binary splitting
recursion exactly to a truncation depth, propagating a finitely supported
measure over beliefs level by level.  Atoms are deduplicated on beliefs
rounded to 12 digits (the greedy orbit revisits frontier and vertex
beliefs constantly, so this acts as the memo table) and the discounted
tail is bracketed by [0, delta^N].
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .exceptions import DivergenceError, InvalidArgumentError, NotApplicableError
from .greedy import (
    NegativeOrdering,
    _partial_forms,
    _split_arrays,
    greedy_split,
    max_stage_payoff_many,
    SIGN_TOL,
)
from .model import Belief, MarkovModel, PayoffStructure, drift, invests
from .splitting import Splitting, make_splitting, no_disclosure, signal_kernel

MEMO_DIGITS = 12
ITERATION_CAP = 10 ** 6


def worker_count() -> int:
    """Worker count from PERSUADE_WORKERS, defaulting to available parallelism."""
    raw = os.environ.get("PERSUADE_WORKERS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1


@dataclass(frozen=True)
class PolicyValueRequest:
    """Inputs of a discounted policy evaluation.

    The truncation depth N defaults to ceil(log(tol)/log(delta)), which
    guarantees delta^N <= tol; stage payoffs lie in [0, 1] so the
    discounted tail after N rounds is inside [0, delta^N].
    """

    initial: Belief
    delta: float
    chain: MarkovModel
    payoffs: PayoffStructure
    tol: float = 1e-6
    depth: Optional[int] = None

    def __post_init__(self):
        if not (0.0 <= self.delta < 1.0):
            raise InvalidArgumentError(f"discount must lie in [0, 1), got {self.delta}")

    def truncation_depth(self) -> int:
        if self.depth is not None:
            return max(1, int(self.depth))
        if self.delta == 0.0:
            return 1
        return max(1, math.ceil(math.log(self.tol) / math.log(self.delta)))


def _unique_beliefs(beliefs: np.ndarray):
    """Deduplicate rows on beliefs rounded to 12 digits; (unique rows, inverse)."""
    keys = np.ascontiguousarray(np.round(beliefs, MEMO_DIGITS) + 0.0)  # +0.0 clears -0.0
    flat = keys.view(np.dtype((np.void, keys.dtype.itemsize * keys.shape[1]))).ravel()
    _, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    return beliefs[first], inverse


def _greedy_forward(P0: np.ndarray, delta: float, chain: MarkovModel,
                    payoffs: PayoffStructure, depth: int,
                    row_cap: int = 20_000_000):
    """Exact depth-truncated greedy values for every row of P0.

    Unrolls the splitting recursion over levels of distinct beliefs: each
    level deduplicates the reachable beliefs (rounded to 12 digits, the
    memo key) and records the two child indices and the split weight, and
    a backward pass accumulates the discounted values.  Returns
    (midpoints, half_widths) with half_width = delta^depth / 2.
    """
    ordering = NegativeOrdering.from_payoffs(payoffs)
    M = chain.transition
    B, origin_idx = _unique_beliefs(P0)

    levels = []
    total_rows = 0
    for n in range(depth):
        invest, a_I, QI, QJ, _, _ = _split_arrays(B, payoffs, ordering)
        rows = B.shape[0]
        total_rows += rows
        if total_rows > row_cap:
            raise DivergenceError(
                f"greedy evaluation exceeded {row_cap} belief rows; "
                "lower the depth or the discount")
        last = n == depth - 1 or delta == 0.0
        if last:
            levels.append((invest, a_I, None, None))
            break
        hasI = invest | (a_I > 0.0)
        hasJ = ~invest & (a_I < 1.0)
        CI = np.where(invest[:, None], B, QI)
        children = np.vstack([CI[hasI], QJ[hasJ]]) @ M
        B, inverse = _unique_beliefs(children)
        nI = int(hasI.sum())
        ci = np.full(rows, -1, dtype=np.int64)
        cj = np.full(rows, -1, dtype=np.int64)
        ci[hasI] = inverse[:nI]
        cj[hasJ] = inverse[nI:]
        levels.append((invest, a_I, ci, cj))

    v = np.zeros(levels[-1][0].shape[0])
    for invest, a_I, ci, cj in reversed(levels):
        stage = np.where(invest, 1.0, a_I)
        if ci is None:
            cont = np.zeros_like(stage)
        else:
            vi = np.where(ci >= 0, v[np.clip(ci, 0, None)], 0.0)
            vj = np.where(cj >= 0, v[np.clip(cj, 0, None)], 0.0)
            cont = np.where(invest, vi, a_I * vi + (1.0 - a_I) * vj)
        v = (1.0 - delta) * stage + delta * cont

    tail = delta ** depth if delta > 0.0 else 0.0
    half = np.full(P0.shape[0], 0.5 * tail)
    return v[origin_idx] + 0.5 * tail, half


def greedy_value_many(initials, delta: float, chain: MarkovModel,
                      payoffs: PayoffStructure, tol: float = 1e-6,
                      depth: Optional[int] = None):
    """Greedy policy values at many initial beliefs at once.

    Returns (values, half_widths) with the same truncation guarantee as
    :func:`greedy_value`.
    """
    P0 = np.vstack([np.asarray(p, dtype=float) for p in initials]) \
        if not isinstance(initials, np.ndarray) else np.asarray(initials, dtype=float)
    req = PolicyValueRequest(Belief(P0[0]), delta, chain, payoffs, tol=tol, depth=depth)
    return _greedy_forward(P0, delta, chain, payoffs, req.truncation_depth())


def greedy_value(req: PolicyValueRequest) -> float:
    """Discounted value of the greedy strategy from the request's initial belief.

    Evaluates the splitting recursion exactly to the truncation depth N and
    brackets the tail by [0, delta^N]; the returned midpoint is within
    delta^N / 2 of the true value (plus negligible pruning slack).
    """
    vals, _ = _greedy_forward(
        req.initial.weights[None, :], req.delta, req.chain, req.payoffs,
        req.truncation_depth())
    return float(vals[0])


def excess(p: Belief, req: PolicyValueRequest) -> float:
    """One-step greedy advantage d(p) = gamma(p) - delta * gamma(drift(p))."""
    pair = np.vstack([p.weights, drift(p, req.chain).weights])
    vals, _ = _greedy_forward(pair, req.delta, req.chain, req.payoffs,
                              req.truncation_depth())
    return float(vals[0] - req.delta * vals[1])


def excess_many(initials, delta, chain, payoffs, tol=1e-6):
    """Vectorized excess over rows of initials; returns (values, error_bounds)."""
    P0 = np.asarray(initials, dtype=float)
    D = P0 @ chain.transition
    vals, half = greedy_value_many(np.vstack([P0, D]), delta, chain, payoffs, tol=tol)
    n = P0.shape[0]
    return vals[:n] - delta * vals[n:], half[:n] + delta * half[n:]


def first_best_bound(req: PolicyValueRequest) -> float:
    """Discounted sum of per-round first-best payoffs (an upper bound on any policy).

    Iterates the unconditional belief through the drift and sums
    (1 - delta) delta^(n-1) times the best one-round payoff; the tail is
    bracketed exactly like greedy_value.
    """
    vals, _ = first_best_bound_many(req.initial.weights[None, :], req.delta,
                                    req.chain, req.payoffs, tol=req.tol,
                                    depth=req.depth)
    return float(vals[0])


def first_best_bound_many(initials, delta, chain, payoffs, tol=1e-6, depth=None):
    P0 = np.asarray(initials, dtype=float)
    req = PolicyValueRequest(Belief(P0[0]), delta, chain, payoffs, tol=tol, depth=depth)
    N = req.truncation_depth()
    B = P0.copy()
    total = np.zeros(P0.shape[0])
    for n in range(N):
        total += (1.0 - delta) * (delta ** n) * max_stage_payoff_many(B, payoffs)
        if n < N - 1 and delta > 0.0:
            B = B @ chain.transition
    tail = delta ** N if delta > 0.0 else 0.0
    return total + 0.5 * tail, np.full(P0.shape[0], 0.5 * tail)


# ---------------------------------------------------------------------------
# policies and simulation


class GreedyPolicy:
    name = "greedy"

    def __init__(self, payoffs: PayoffStructure):
        self.payoffs = payoffs

    def splitting(self, p: Belief) -> Splitting:
        split = greedy_split(p, self.payoffs)
        if split.q_J is None or split.a_I <= 0.0:
            if split.q_J is None:
                return no_disclosure(p)
            return make_splitting(p, [(1.0, split.q_J)])
        return make_splitting(p, [(split.a_I, split.q_I), (split.a_J, split.q_J)])


class NoDisclosurePolicy:
    name = "no-disclosure"

    def splitting(self, p: Belief) -> Splitting:
        return no_disclosure(p)


class FullDisclosurePolicy:
    name = "full-disclosure"

    def splitting(self, p: Belief) -> Splitting:
        atoms = [(float(w), Belief.unit(p.dim, i))
                 for i, w in enumerate(p.weights) if w > 0.0]
        return make_splitting(p, atoms)


class GridPolicy:
    """Optimal-on-the-grid policy extracted from a solved value field."""

    name = "grid-optimal"

    def __init__(self, field, delta, chain, payoffs):
        self.field = field
        self.delta = delta
        self.chain = chain
        self.payoffs = payoffs
        self._memo = {}

    def splitting(self, p: Belief) -> Splitting:
        key = tuple(np.round(p.weights, MEMO_DIGITS) + 0.0)
        mu = self._memo.get(key)
        if mu is None:
            from .value_iteration import extract_splitting
            mu = extract_splitting(p, self.field, self.delta, self.chain, self.payoffs)
            self._memo[key] = mu
        return mu


def resolve_policy(policy, req: PolicyValueRequest, field=None):
    if not isinstance(policy, str):
        return policy
    if policy == "greedy":
        return GreedyPolicy(req.payoffs)
    if policy == "no-disclosure":
        return NoDisclosurePolicy()
    if policy == "full-disclosure":
        return FullDisclosurePolicy()
    if policy == "grid-optimal":
        if field is None:
            raise InvalidArgumentError("grid-optimal policy needs a solved value field")
        return GridPolicy(field, req.delta, req.chain, req.payoffs)
    raise InvalidArgumentError(f"unknown policy {policy!r}")


@dataclass
class TrajectoryRecord:
    """Round-by-round log of one simulated play."""

    policy: str
    seed: int
    states: np.ndarray            # true state per round
    pre_beliefs: np.ndarray       # p_n, before the message
    messages: np.ndarray          # message index into the round's splitting
    posteriors: np.ndarray        # q_n, after the message
    invested: np.ndarray          # bool per round
    increments: np.ndarray        # (1-delta) delta^(n-1) on invested rounds
    discounted_payoff: float


def simulate_play(req: PolicyValueRequest, policy, seed: int,
                  horizon: int) -> TrajectoryRecord:
    """Simulate one play: sample states, messages, and Bayes updates.

    Deterministic given the seed.  The advisor plays the given policy
    (greedy, no-disclosure, full-disclosure, or grid-optimal); the investor
    invests exactly when the posterior is in the investment region.
    """
    pol = resolve_policy(policy, req)
    rng = np.random.default_rng(seed)
    M = req.chain.transition
    r = req.payoffs.r
    S = req.chain.dim

    states = np.empty(horizon, dtype=np.int64)
    messages = np.empty(horizon, dtype=np.int64)
    invested = np.empty(horizon, dtype=bool)
    increments = np.empty(horizon)
    pre = np.empty((horizon, S))
    post = np.empty((horizon, S))

    p = req.initial
    state = int(rng.choice(S, p=req.initial.weights))
    for n in range(horizon):
        mu = pol.splitting(p)
        kernel = signal_kernel(mu, p)
        msg = int(rng.choice(kernel.n_messages,
                             p=kernel.message_probabilities[state]))
        q = mu.posteriors[msg]
        inv = bool(q.weights @ r >= -1e-12)
        states[n] = state
        messages[n] = msg
        pre[n] = p.weights
        post[n] = q.weights
        invested[n] = inv
        increments[n] = (1.0 - req.delta) * req.delta ** n if inv else 0.0
        state = int(rng.choice(S, p=M[state]))
        p = Belief(q.weights @ M)
    return TrajectoryRecord(pol.name, seed, states, pre, messages, post,
                            invested, increments, float(increments.sum()))


def _membership_mask(Q: np.ndarray, payoffs: PayoffStructure,
                     bounds: Optional[tuple], ordering: NegativeOrdering,
                     tol: float = SIGN_TOL) -> np.ndarray:
    """Rows of Q inside the target set (the polytope, or I when bounds is None)."""
    total = Q @ payoffs.r
    if bounds is None:
        return total >= -1e-12
    lower, upper = bounds
    L = _partial_forms(Q, payoffs, ordering)
    ok = total <= tol
    if lower >= 1:
        ok &= L[:, lower] >= -tol
    ok &= L[:, upper] <= tol
    return ok


def simulate_entry_times(req: PolicyValueRequest, bounds: Optional[tuple],
                         n_trajectories: int, seed: int, horizon: int):
    """Entry round of the greedy posterior into the target set, batched.

    Returns an int array with the 1-based entry round per trajectory and 0
    for trajectories that never entered within the horizon.  Trajectories
    are simulated in parallel with a shared generator, deterministically
    for a given seed.
    """
    rng = np.random.default_rng(seed)
    ordering = NegativeOrdering.from_payoffs(req.payoffs)
    M = req.chain.transition
    n = n_trajectories
    B = np.tile(req.initial.weights, (n, 1))
    theta = np.zeros(n, dtype=np.int64)
    for rnd in range(1, horizon + 1):
        invest, a_I, QI, QJ, _, _ = _split_arrays(B, req.payoffs, ordering)
        u = rng.random(n)
        toI = invest | (u < a_I)
        Q = np.where(toI[:, None], np.where(invest[:, None], B, QI), QJ)
        entered = _membership_mask(Q, req.payoffs, bounds, ordering)
        fresh = entered & (theta == 0)
        theta[fresh] = rnd
        if np.all(theta > 0):
            break
        B = Q @ M
    return theta


def simulate_discounted_payoffs(req: PolicyValueRequest, policy,
                                n_trajectories: int, seed: int,
                                horizon: int) -> np.ndarray:
    """Realized discounted payoffs of many independent plays.

    The greedy and no-disclosure policies run vectorized; other policies
    fall back to per-trajectory simulation chunked over worker threads in
    a deterministic merge order.
    """
    pol = resolve_policy(policy, req)
    if isinstance(pol, (GreedyPolicy, NoDisclosurePolicy)):
        rng = np.random.default_rng(seed)
        ordering = NegativeOrdering.from_payoffs(req.payoffs)
        M = req.chain.transition
        n = n_trajectories
        B = np.tile(req.initial.weights, (n, 1))
        payoff = np.zeros(n)
        for rnd in range(horizon):
            if isinstance(pol, GreedyPolicy):
                invest, a_I, QI, QJ, _, _ = _split_arrays(B, req.payoffs, ordering)
                u = rng.random(n)
                toI = invest | (u < a_I)
                Q = np.where(toI[:, None], np.where(invest[:, None], B, QI), QJ)
            else:
                Q = B
                toI = (B @ req.payoffs.r) >= -1e-12
            payoff += np.where(toI, (1.0 - req.delta) * req.delta ** rnd, 0.0)
            B = Q @ M
        return payoff

    from concurrent.futures import ThreadPoolExecutor

    seeds = np.random.SeedSequence(seed).spawn(n_trajectories)
    def one(i):
        return simulate_play(req, pol, int(seeds[i].generate_state(1)[0]),
                             horizon).discounted_payoff
    workers = worker_count()
    if workers <= 1:
        return np.array([one(i) for i in range(n_trajectories)])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(one, range(n_trajectories))))


class EntryTime(NamedTuple):
    theta: Optional[int]     # first 1-based round with the posterior in the set
    n_bar: Optional[int]     # drift bound: rounds after which every belief has drifted in


def drift_bound(chain: MarkovModel, payoffs: PayoffStructure,
                bounds: Optional[tuple]) -> Optional[int]:
    """Smallest n after which the n-fold drift of every belief lies in the
    open half-spaces of the target set that contain the invariant measure.

    Requires a renewal chain; returns None when the invariant measure has
    no positive margin for some face (no such bound exists).
    """
    if not chain.is_renewal:
        return None
    lam = chain.ratio
    m = chain.invariant.weights
    ordering = NegativeOrdering.from_payoffs(payoffs)
    dim = payoffs.dim
    verts = np.eye(dim)

    constraints = []
    if bounds is None:
        constraints.append((payoffs.r @ m, verts @ payoffs.r))
    else:
        lower, upper = bounds
        Lm = _partial_forms(m[None, :], payoffs, ordering)[0]
        Lv = _partial_forms(verts, payoffs, ordering)
        if lower >= 1:
            constraints.append((Lm[lower], Lv[:, lower]))
        constraints.append((-Lm[upper], -Lv[:, upper]))

    n_bar = 1
    for margin, vertex_vals in constraints:
        if margin <= 0.0:
            return None
        worst = float(vertex_vals.min())
        if worst >= 0.0:
            continue
        if lam == 0.0:
            continue
        threshold = margin / (margin - worst)
        n = int(math.floor(math.log(threshold) / math.log(lam))) + 1
        while lam ** n >= threshold:
            n += 1
        n_bar = max(n_bar, n)
    return n_bar


def entry_time(trajectory: TrajectoryRecord, payoffs: PayoffStructure,
               bounds: Optional[tuple] = None,
               chain: Optional[MarkovModel] = None) -> EntryTime:
    """First round whose posterior lies in the target set, plus the drift bound.

    ``bounds`` is a p_polytope description, or None for the investment
    region (the stable set when the invariant measure invests).
    """
    ordering = NegativeOrdering.from_payoffs(payoffs)
    mask = _membership_mask(trajectory.posteriors, payoffs, bounds, ordering)
    hits = np.flatnonzero(mask)
    theta = int(hits[0]) + 1 if hits.size else None
    n_bar = drift_bound(chain, payoffs, bounds) if chain is not None else None
    return EntryTime(theta, n_bar)


# ---------------------------------------------------------------------------
# breakpoint construction on three states


@dataclass(frozen=True)
class BreakpointSequence:
    """Belief breakpoints of the greedy dynamics on the worst edge.

    o_points[0] is the worst vertex; p_points[k] = drift(o_points[k]) all
    lie on a line parallel to the negative edge.  For k >= 1, p_points[k]
    lies on the segment from the better frontier vertex to o_points[k-1].
    """

    o_points: tuple
    p_points: tuple
    K: int
    b_plus: Belief
    c_plus: Belief


def _in_triangle(pt, v0, v1, v2, tol=1e-10) -> bool:
    T = np.column_stack([v1 - v0, v2 - v0])
    det = T[0, 0] * T[1, 1] - T[0, 1] * T[1, 0]
    if abs(det) < 1e-15:
        return False
    rhs = pt - v0
    l1 = (T[1, 1] * rhs[0] - T[0, 1] * rhs[1]) / det
    l2 = (-T[1, 0] * rhs[0] + T[0, 0] * rhs[1]) / det
    return l1 >= -tol and l2 >= -tol and l1 + l2 <= 1.0 + tol


def breakpoints(chain: MarkovModel, payoffs: PayoffStructure) -> BreakpointSequence:
    """Breakpoints O_1..O_K on the negative edge for 3-state renewal chains.

    Requires two negative states (edge endpoints B, C with r(B) >= r(C))
    and an invariant measure in the investment region or in the triangle
    spanned by the two frontier vertices and C.  Starting from O_1 = C,
    each next point is the unique O on the segment [B, O_k] whose drift
    falls on the line through the frontier vertex above B and O_k; the
    construction stops when the drift of B is already on the covered side.
    """
    if chain.dim != 3 or payoffs.dim != 3:
        raise NotApplicableError("breakpoints require exactly three states")
    if not chain.is_renewal:
        raise NotApplicableError("breakpoints require a renewal chain")
    if len(payoffs.negative_states) != 2:
        raise NotApplicableError("breakpoints require exactly two negative states")

    ordering = NegativeOrdering.from_payoffs(payoffs)
    state_B, state_C = ordering.states
    state_A = payoffs.positive_states[0]
    r = payoffs.r

    def frontier_on(neg):
        t = -r[neg] / (r[state_A] - r[neg])
        w = np.zeros(3)
        w[state_A] = t
        w[neg] = 1.0 - t
        return Belief(w)

    b_plus = frontier_on(state_B)
    c_plus = frontier_on(state_C)

    # planar coordinates (weight on B, weight on C)
    def xy(p):
        w = np.asarray(p, dtype=float)
        return np.array([w[state_B], w[state_C]])

    def lift(pt):
        w = np.zeros(3)
        w[state_B], w[state_C] = pt
        w[state_A] = 1.0 - pt.sum()
        return Belief(np.clip(w, 0.0, None))

    m2 = xy(chain.invariant)
    lam = chain.ratio
    bp2 = xy(b_plus)
    cp2 = xy(c_plus)
    B2 = xy(Belief.unit(3, state_B))
    C2 = xy(Belief.unit(3, state_C))

    if not (invests(chain.invariant, payoffs)
            or _in_triangle(m2, cp2, bp2, C2)):
        raise NotApplicableError(
            "invariant measure lies outside the investment region and the covered triangle")

    def phi2(pt):
        return m2 + lam * (pt - m2)

    def cross(a, b):
        return a[0] * b[1] - a[1] * b[0]

    s_values = [1.0]                      # O_k = (1 - s) B + s C
    o2 = [C2.copy()]
    phiB = phi2(B2)
    scale = max(1.0, float(np.abs(phiB).max()))
    for _ in range(ITERATION_CAP):
        ok = o2[-1]
        d = ok - bp2
        side_B = cross(phiB - bp2, d)
        side_ref = cross(cp2 - bp2, d)
        if abs(side_B) <= 1e-14 * scale or np.sign(side_B) == np.sign(side_ref):
            break
        g0 = side_B
        g1 = cross(phi2(C2) - bp2, d)
        if g0 == g1:
            raise DivergenceError("degenerate breakpoint geometry")
        s = g0 / (g0 - g1)
        if not (0.0 <= s < s_values[-1] + 1e-12):
            raise DivergenceError(
                f"breakpoint left the segment: s={s} after {len(o2)} points")
        s = min(s, s_values[-1])
        s_values.append(s)
        o2.append((1.0 - s) * B2 + s * C2)
    else:
        raise DivergenceError("breakpoint construction exceeded the iteration cap")

    o_points = tuple(lift(pt) for pt in o2)
    p_points = tuple(drift(p, chain) for p in o_points)
    return BreakpointSequence(o_points, p_points, len(o_points), b_plus, c_plus)
