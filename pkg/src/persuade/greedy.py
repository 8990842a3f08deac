"""Closed-form greedy splitting, cell decomposition, and the stability polytope.

At a noninvestment belief the greedy strategy maximizes the probability of
landing in the investment region.  The maximizing subprobability measure
fills states in decreasing payoff order up to a critical negative state,
which yields the two-point decomposition p = a_I q_I + a_J q_J in closed
form.  The sign pattern of the partial linear forms L_k carves the
noninvestment region into cells that are stable under the splitting.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import InvalidArgumentError, NotApplicableError
from .model import Belief, PayoffStructure, _check_dim, invests

SIGN_TOL = 1e-10
INVEST_TOL = 1e-12


@dataclass(frozen=True)
class NegativeOrdering:
    """Negative states ordered by decreasing payoff (ties by state index)."""

    states: tuple

    @staticmethod
    def from_payoffs(payoffs: PayoffStructure) -> "NegativeOrdering":
        neg = sorted(payoffs.negative_states, key=lambda i: (-payoffs.r[i], i))
        return NegativeOrdering(tuple(neg))

    def __len__(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class GreedySplit:
    """Two-point greedy decomposition p = a_I q_I + a_J q_J.

    q_I is None exactly when a_I = 0 (p carried by negative states: the
    frontier point is indeterminate), and q_J is None exactly when a_J = 0
    (no-disclosure at an investing belief).  pi_star is the optimal
    subprobability measure of the underlying program and k_star the index
    of the critical negative state (None on the investment region).
    """

    a_I: float
    q_I: Optional[Belief]
    a_J: float
    q_J: Optional[Belief]
    k_star: Optional[int]
    pi_star: np.ndarray

    @property
    def q_I_indeterminate(self) -> bool:
        return self.q_I is None

    @property
    def q_J_indeterminate(self) -> bool:
        return self.q_J is None


def _partial_forms(P: np.ndarray, payoffs: PayoffStructure,
                   ordering: NegativeOrdering) -> np.ndarray:
    """L_k evaluated at the rows of P; column k holds L_k, column 0 the positive part."""
    contrib = P * payoffs.r
    pos = list(payoffs.positive_states)
    pos_part = contrib[:, pos].sum(axis=1) if pos else np.zeros(P.shape[0])
    K = len(ordering)
    L = np.empty((P.shape[0], K + 1))
    L[:, 0] = pos_part
    if K:
        L[:, 1:] = pos_part[:, None] + np.cumsum(contrib[:, list(ordering.states)], axis=1)
    return L


def ell(k: int, p: Belief, payoffs: PayoffStructure) -> float:
    """Partial linear form L_k(p): positive states plus the k least-negative states.

    L_0 is the positive part alone (the form the closed-form optimum needs);
    membership tests of the first cell treat the lower constraint as vacuous.
    L_k is pointwise decreasing in k.
    """
    _check_dim(p, payoffs.dim)
    ordering = NegativeOrdering.from_payoffs(payoffs)
    if not (0 <= k <= len(ordering)):
        raise InvalidArgumentError(f"k={k} out of range [0, {len(ordering)}]")
    L = _partial_forms(p.weights[None, :], payoffs, ordering)
    return float(L[0, k])


def cell_index(p: Belief, payoffs: PayoffStructure) -> Optional[int]:
    """Index k of the cell containing p, or None on the investment region.

    The cell index is the smallest k with L_k(p) <= 0, equivalently p lies
    where the greedy split fills negative states up to index k.  Sign tests
    use an absolute tolerance of 1e-10.
    """
    _check_dim(p, payoffs.dim)
    if invests(p, payoffs):
        return None
    ordering = NegativeOrdering.from_payoffs(payoffs)
    L = _partial_forms(p.weights[None, :], payoffs, ordering)[0]
    below = np.flatnonzero(L[1:] <= SIGN_TOL)
    # <p, r> = L_K < 0 for a noninvesting p, so the set is nonempty
    return int(below[0]) + 1


def cell_contains(p: Belief, k: int, payoffs: PayoffStructure,
                  tol: float = SIGN_TOL) -> bool:
    """Closed-cell membership test with boundary tolerance.

    The closure of cell k meets the frontier, so membership is tested as
    <p, r> <= tol, L_{k-1}(p) >= -tol (vacuous for k = 1), L_k(p) <= tol.
    """
    _check_dim(p, payoffs.dim)
    ordering = NegativeOrdering.from_payoffs(payoffs)
    if not (1 <= k <= len(ordering)):
        raise InvalidArgumentError(f"cell index {k} out of range")
    L = _partial_forms(p.weights[None, :], payoffs, ordering)[0]
    if float(p.weights @ payoffs.r) > tol:
        return False
    if k > 1 and L[k - 1] < -tol:
        return False
    return bool(L[k] <= tol)


def _split_arrays(P: np.ndarray, payoffs: PayoffStructure,
                  ordering: Optional[NegativeOrdering] = None):
    """Vectorized greedy split of the rows of P.

    Returns (invest_mask, a_I, QI, QJ, kstar, pi_star).  Rows in the
    investment region get a_I = 1 and QI = the row itself; QI rows with
    a_I = 0 and QJ rows with a_J = 0 are zero-filled and must be masked by
    the caller.
    """
    if ordering is None:
        ordering = NegativeOrdering.from_payoffs(payoffs)
    n, S = P.shape
    r = payoffs.r
    total = P @ r
    invest = total >= -INVEST_TOL

    L = _partial_forms(P, payoffs, ordering)
    K = len(ordering)
    pi = P.copy()
    kstar = np.zeros(n, dtype=np.int64)
    if K:
        below = L[:, 1:] <= SIGN_TOL
        # argmax finds the first True column; L is monotone in k
        kstar = below.argmax(axis=1) + 1
        kstar[invest] = 0
        rows = ~invest
        if np.any(rows):
            idx = np.flatnonzero(rows)
            ks = kstar[idx]
            ord_states = np.asarray(ordering.states)
            # zero the ordered negative states at and beyond the critical index
            rank = np.empty(S, dtype=np.int64)
            rank.fill(0)
            rank[ord_states] = np.arange(1, K + 1)
            beyond = rank[None, :] >= ks[:, None]
            neg_mask = np.zeros(S, dtype=bool)
            neg_mask[ord_states] = True
            pi_rows = pi[idx]
            pi_rows[beyond & neg_mask[None, :]] = 0.0
            # critical state receives the mass that zeroes the linear form
            crit = ord_states[ks - 1]
            r_crit = r[crit]
            L_prev = L[idx, ks - 1]
            mass = np.clip(-L_prev / r_crit, 0.0, P[idx, crit])
            pi_rows[np.arange(len(idx)), crit] = mass
            pi[idx] = pi_rows

    a_I = np.where(invest, 1.0, pi.sum(axis=1))
    a_I = np.clip(a_I, 0.0, 1.0)
    QI = np.zeros_like(P)
    QJ = np.zeros_like(P)
    has_I = a_I > 0.0
    QI[invest] = P[invest]
    mid = has_I & ~invest
    if np.any(mid):
        QI[mid] = pi[mid] / a_I[mid, None]
    a_J = 1.0 - a_I
    has_J = a_J > 0.0
    rem = has_J & ~invest
    if np.any(rem):
        rows_qj = np.clip(P[rem] - pi[rem], 0.0, None)
        sums = rows_qj.sum(axis=1, keepdims=True)
        # round-off can wipe out a remainder of weight ~1e-16; any belief
        # works there since its weight is negligible
        dead = sums[:, 0] <= 0.0
        if np.any(dead):
            rows_qj[dead] = 1.0 / S
            sums[dead] = 1.0
        QJ[rem] = rows_qj / sums
    return invest, a_I, QI, QJ, kstar, pi


def greedy_split(p: Belief, payoffs: PayoffStructure) -> GreedySplit:
    """Greedy splitting at p.

    On the investment region (frontier included) no information is
    disclosed: a_I = 1 and q_I = p.  Otherwise the optimal subprobability
    measure keeps the full mass of positive states and of negative states
    better than the critical one, puts -L_{k*-1}(p)/r(w_{k*}) on the
    critical state, and drops the rest; q_I and q_J renormalize the two
    parts.  When p is carried by negative states a_I = 0 and q_I is
    flagged indeterminate rather than pinned to an arbitrary frontier point.
    """
    _check_dim(p, payoffs.dim)
    P = p.weights[None, :]
    invest, a_I, QI, QJ, kstar, pi = _split_arrays(P, payoffs)
    if invest[0]:
        return GreedySplit(1.0, p, 0.0, None, None, p.weights.copy())
    aI = float(a_I[0])
    aJ = 1.0 - aI
    q_I = Belief(QI[0]) if aI > 0.0 else None
    q_J = Belief(QJ[0]) if aJ > 0.0 else None
    return GreedySplit(aI, q_I, aJ, q_J, int(kstar[0]), pi[0])


def max_stage_payoff(p: Belief, payoffs: PayoffStructure) -> float:
    """Highest one-round payoff at p: 1 on the investment region, else a_I."""
    if invests(p, payoffs):
        return 1.0
    return greedy_split(p, payoffs).a_I


def max_stage_payoff_many(P: np.ndarray, payoffs: PayoffStructure) -> np.ndarray:
    """Vectorized max_stage_payoff over the rows of P."""
    invest, a_I, _, _, _, _ = _split_arrays(np.asarray(P, dtype=float), payoffs)
    return np.where(invest, 1.0, a_I)


def lp_value_oracle(p: Belief, payoffs: PayoffStructure) -> float:
    """Optimal mass of {0 <= pi <= p, <pi, r> >= 0} by vertex enumeration.

    Deliberately independent of the closed form: enumerates all box
    corners plus intersections of box edges with the hyperplane
    <pi, r> = 0 and takes the best feasible total mass.
    """
    _check_dim(p, payoffs.dim)
    r = payoffs.r
    pw = p.weights
    n = p.dim
    best = 0.0
    for corner in range(1 << n):
        pi = np.array([pw[i] if corner >> i & 1 else 0.0 for i in range(n)])
        val = pi @ r
        if val >= -1e-14:
            best = max(best, pi.sum())
        # relax each coordinate in turn onto the hyperplane
        for free in range(n):
            if r[free] == 0.0:
                continue
            rest = pi.copy()
            rest[free] = 0.0
            x = -(rest @ r) / r[free]
            if -1e-14 <= x <= pw[free] + 1e-14:
                cand = rest.copy()
                cand[free] = min(max(x, 0.0), pw[free])
                if cand @ r >= -1e-12:
                    best = max(best, cand.sum())
    return min(best, 1.0)


def p_polytope(m: Belief, payoffs: PayoffStructure) -> tuple:
    """Index bounds (lower, upper) of the stable polytope around m.

    The polytope is {p in the closed noninvestment region :
    L_lower(p) >= 0 >= L_upper(p)}, with a lower index of 0 meaning the
    constraint is vacuous.  When m lies strictly inside its cell the
    polytope is that cell; when some forms vanish at m it is the union of
    the cells surrounding the run of zeros.  Not applicable when m invests.
    """
    _check_dim(m, payoffs.dim)
    if invests(m, payoffs):
        raise NotApplicableError(
            "m lies in the investment region; the investment region itself is the stable set")
    ordering = NegativeOrdering.from_payoffs(payoffs)
    K = len(ordering)
    L = _partial_forms(m.weights[None, :], payoffs, ordering)[0]
    k = int(np.flatnonzero(L[1:] <= SIGN_TOL)[0]) + 1
    if L[k] < -SIGN_TOL:
        # strict interior of cell k (lower constraint vacuous for k = 1)
        return (k - 1, k)
    # the run of zeros is capped at K-1: the last form is <m, r> < 0, though
    # it may sit inside the sign tolerance when m hugs the frontier
    zeros = [j for j in range(k, K) if abs(L[j]) <= SIGN_TOL]
    l = max(zeros, default=k - 1)
    return (k - 1, l + 1)


def p_polytope_contains(p: Belief, payoffs: PayoffStructure, bounds: tuple,
                        tol: float = SIGN_TOL) -> bool:
    """Membership in the polytope described by p_polytope bounds."""
    _check_dim(p, payoffs.dim)
    lower, upper = bounds
    ordering = NegativeOrdering.from_payoffs(payoffs)
    L = _partial_forms(p.weights[None, :], payoffs, ordering)[0]
    if float(p.weights @ payoffs.r) > tol:
        return False
    if lower >= 1 and L[lower] < -tol:
        return False
    return bool(L[upper] <= tol)
