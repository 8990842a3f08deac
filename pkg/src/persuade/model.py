"""States, payoffs, beliefs, and Markov dynamics.

The investor holds a belief over a finite state space and invests exactly
when the expected net payoff is nonnegative (ties count as investing).
Between rounds the belief drifts through the transition matrix.  Renewal
chains, where the state is redrawn from a fixed distribution at geometric
times, make the drift a homothety of the simplex and get a dedicated
constructor.
"""

from __future__ import annotations

import enum
from typing import Iterable, Optional

import numpy as np
from scipy.sparse.csgraph import connected_components

from .exceptions import (
    AmbiguousInvariantError,
    DimensionMismatchError,
    InvalidArgumentError,
    NoPreimageError,
    OutOfSimplexError,
)

SUM_TOL = 1e-12
NEG_TOL = 1e-12
FRONTIER_TOL = 1e-12
INVARIANT_TOL = 1e-10


class Belief:
    """A probability vector over states.

    Weights are renormalized on construction.  Entries below -1e-12 are
    rejected; round-off negatives above that are clamped to zero, which
    guards against interpolation noise.
    """

    __slots__ = ("_w",)

    def __init__(self, weights: Iterable[float]):
        w = np.asarray(weights, dtype=float).copy()
        if w.ndim != 1 or w.size == 0:
            raise InvalidArgumentError("belief weights must be a nonempty 1-d vector")
        if np.any(w < -NEG_TOL):
            raise InvalidArgumentError(f"belief has negative entries: {w}")
        w[w < 0] = 0.0
        total = w.sum()
        if total <= 0.0:
            raise InvalidArgumentError("belief weights sum to zero")
        w /= total
        w.flags.writeable = False
        self._w = w

    @property
    def weights(self) -> np.ndarray:
        return self._w

    @property
    def dim(self) -> int:
        return self._w.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self._w, dtype=dtype)

    def __len__(self) -> int:
        return self._w.size

    def __getitem__(self, i):
        return self._w[i]

    def __iter__(self):
        return iter(self._w)

    def __eq__(self, other) -> bool:
        if isinstance(other, Belief):
            return bool(np.array_equal(self._w, other._w))
        return NotImplemented

    def isclose(self, other, tol: float = 1e-10) -> bool:
        return bool(np.max(np.abs(self._w - np.asarray(other, dtype=float))) <= tol)

    def __repr__(self) -> str:
        return f"Belief({np.array2string(self._w, precision=6, separator=', ')})"

    @staticmethod
    def unit(dim: int, state: int) -> "Belief":
        w = np.zeros(dim)
        w[state] = 1.0
        return Belief(w)


class Region(enum.Enum):
    INVEST = "invest"
    NO_INVEST = "no-invest"
    FRONTIER = "frontier"


class PayoffStructure:
    """Per-state net payoff vector and the induced sign partition.

    ``positive_states`` holds the states with payoff >= 0 and
    ``negative_states`` those with payoff < 0.  A structure with one of the
    two sides empty is degenerate (every belief invests, or disclosure can
    never help); it is accepted and flagged rather than rejected so that
    such instances can still be evaluated.
    """

    __slots__ = ("_r", "_pos", "_neg")

    def __init__(self, r: Iterable[float]):
        r = np.asarray(r, dtype=float).copy()
        if r.ndim != 1 or r.size == 0:
            raise InvalidArgumentError("payoff vector must be a nonempty 1-d vector")
        r.flags.writeable = False
        self._r = r
        self._pos = tuple(int(i) for i in np.flatnonzero(r >= 0.0))
        self._neg = tuple(int(i) for i in np.flatnonzero(r < 0.0))

    @property
    def r(self) -> np.ndarray:
        return self._r

    @property
    def dim(self) -> int:
        return self._r.size

    @property
    def positive_states(self) -> tuple:
        return self._pos

    @property
    def negative_states(self) -> tuple:
        return self._neg

    @property
    def degeneracy(self) -> Optional[str]:
        """None for a proper instance, else which side of the partition is empty."""
        if not self._neg:
            return "no-negative-states"
        if not self._pos:
            return "no-positive-states"
        return None

    def __repr__(self) -> str:
        return f"PayoffStructure(r={np.array2string(self._r, separator=', ')})"


class MarkovModel:
    """Row-stochastic transition matrix with its invariant measure.

    ``renewal`` holds the pair (m, lam) when the chain was built by
    :func:`renewal_chain`; the belief drift is then the homothety
    phi(p) = m + lam (p - m).
    """

    __slots__ = ("_M", "_m", "_renewal", "_irreducible")

    def __init__(self, transition, invariant: Optional[Belief] = None,
                 renewal: Optional[tuple] = None):
        M = np.asarray(transition, dtype=float).copy()
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise InvalidArgumentError("transition matrix must be square")
        if np.any(M < -NEG_TOL):
            raise InvalidArgumentError("transition matrix has negative entries")
        M[M < 0] = 0.0
        row_err = np.max(np.abs(M.sum(axis=1) - 1.0))
        if row_err > 1e-8:
            raise InvalidArgumentError(f"transition rows sum to 1 +/- {row_err:.3g}")
        M /= M.sum(axis=1, keepdims=True)
        M.flags.writeable = False
        self._M = M

        if invariant is None:
            invariant = invariant_measure(M)
        else:
            invariant = invariant if isinstance(invariant, Belief) else Belief(invariant)
            if invariant.dim != M.shape[0]:
                raise DimensionMismatchError("invariant measure has wrong dimension")
        resid = np.max(np.abs(invariant.weights @ M - invariant.weights))
        if resid > INVARIANT_TOL:
            raise InvalidArgumentError(f"invariant measure residual {resid:.3g} > {INVARIANT_TOL}")
        self._m = invariant
        self._renewal = renewal
        # single recurrent communicating class <=> strongly connected support
        n_comp, _ = connected_components(M > 0, directed=True, connection="strong")
        self._irreducible = bool(n_comp == 1)

    @property
    def transition(self) -> np.ndarray:
        return self._M

    @property
    def invariant(self) -> Belief:
        return self._m

    @property
    def dim(self) -> int:
        return self._M.shape[0]

    @property
    def renewal(self) -> Optional[tuple]:
        return self._renewal

    @property
    def is_renewal(self) -> bool:
        return self._renewal is not None

    @property
    def ratio(self) -> Optional[float]:
        """Homothety ratio lam for renewal chains, else None."""
        return self._renewal[1] if self._renewal is not None else None

    @property
    def is_irreducible(self) -> bool:
        return self._irreducible

    def __repr__(self) -> str:
        kind = f"renewal(lam={self.ratio})" if self.is_renewal else "matrix"
        return f"MarkovModel(dim={self.dim}, {kind})"


def renewal_chain(m, lam: float) -> MarkovModel:
    """Chain that redraws the state from ``m`` at geometric times.

    Diagonal entries are (1 - lam) m(w) + lam and off-diagonal entries
    (1 - lam) m(w').  The invariant measure is ``m`` itself and the belief
    drift is the homothety with center m and ratio lam.  Only nonnegative
    ratios lam in [0, 1) are allowed.
    """
    if not (0.0 <= lam < 1.0):
        raise InvalidArgumentError(f"renewal ratio must lie in [0, 1), got {lam}")
    m = m if isinstance(m, Belief) else Belief(m)
    n = m.dim
    M = np.tile((1.0 - lam) * m.weights, (n, 1))
    M[np.diag_indices(n)] += lam
    return MarkovModel(M, invariant=m, renewal=(m, float(lam)))


def invariant_measure(M) -> Belief:
    """Stationary distribution of a row-stochastic matrix.

    Solves m M = m, sum(m) = 1 through the null space of (M^T - I).  Raises
    AmbiguousInvariantError when the stationary distribution is not unique
    (the null space has dimension > 1, e.g. the identity matrix); callers
    may then supply the invariant explicitly.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise InvalidArgumentError("transition matrix must be square")
    n = M.shape[0]
    A = M.T - np.eye(n)
    _, s, vh = np.linalg.svd(A)
    null_dim = int(np.sum(s < 1e-9 * max(1.0, s[0] if s.size else 1.0)))
    if null_dim == 0:
        # numerically guaranteed to be >= 1 for a stochastic matrix
        null_dim = 1
    if null_dim > 1:
        raise AmbiguousInvariantError(
            f"chain has {null_dim} stationary distributions; supply the invariant explicitly")
    v = vh[-1]
    if v.sum() < 0:
        v = -v
    v[np.abs(v) < 1e-14] = 0.0
    if np.any(v < -1e-9):
        raise AmbiguousInvariantError("stationary solve produced a signed vector")
    return Belief(np.clip(v, 0.0, None))


def _check_dim(p: Belief, dim: int) -> None:
    if p.dim != dim:
        raise DimensionMismatchError(f"belief has dimension {p.dim}, expected {dim}")


def expected_payoff(p: Belief, payoffs: PayoffStructure) -> float:
    """Expected net payoff <p, r> from investing at belief p."""
    _check_dim(p, payoffs.dim)
    return float(p.weights @ payoffs.r)


def classify(p: Belief, payoffs: PayoffStructure) -> Region:
    """Invest / NoInvest / Frontier classification of a belief.

    The frontier band is |<p, r>| <= 1e-12; frontier beliefs invest (the
    investor invests when indifferent).
    """
    value = expected_payoff(p, payoffs)
    if abs(value) <= FRONTIER_TOL:
        return Region.FRONTIER
    return Region.INVEST if value > 0.0 else Region.NO_INVEST


def invests(p: Belief, payoffs: PayoffStructure) -> bool:
    """True when the investor invests at p (frontier included)."""
    return expected_payoff(p, payoffs) >= -FRONTIER_TOL


def drift(p: Belief, chain: MarkovModel) -> Belief:
    """One-round belief drift p M (no information disclosed)."""
    _check_dim(p, chain.dim)
    return Belief(p.weights @ chain.transition)


def drift_preimage(q: Belief, chain: MarkovModel) -> Belief:
    """The belief p with drift(p) = q, for renewal chains with lam > 0.

    Inverts the homothety: p = m + (q - m)/lam.  Raises OutOfSimplexError
    when the inverse leaves the simplex, which signals that no belief
    drifts to q.
    """
    if not chain.is_renewal or chain.ratio == 0.0:
        raise NoPreimageError("drift preimage requires a renewal chain with lam > 0")
    _check_dim(q, chain.dim)
    m, lam = chain.renewal
    pre = m.weights + (q.weights - m.weights) / lam
    if np.any(pre < -NEG_TOL) or np.any(pre > 1.0 + NEG_TOL):
        raise OutOfSimplexError(f"no belief drifts to {q}: preimage {pre} leaves the simplex")
    return Belief(np.clip(pre, 0.0, None))


def frontier_extremes(payoffs: PayoffStructure) -> list:
    """Extreme points of the investment frontier.

    For each pair (negative state, positive state) the segment between the
    two vertices crosses the frontier at a unique point, carried with
    weight t = -r(w-) / (r(w+) - r(w-)) on the positive state.  Points are
    returned ordered by (negative index, positive index).
    """
    if not payoffs.negative_states or not payoffs.positive_states:
        raise InvalidArgumentError("frontier extremes require both payoff signs present")
    r = payoffs.r
    points = []
    for wn in payoffs.negative_states:
        for wp in payoffs.positive_states:
            t = -r[wn] / (r[wp] - r[wn])
            w = np.zeros(payoffs.dim)
            w[wp] = t
            w[wn] = 1.0 - t
            points.append(Belief(w))
    return points


def random_belief(rng: np.random.Generator, dim: int, alpha: float = 1.0) -> Belief:
    """Dirichlet-distributed belief, the workhorse of the property tests."""
    return Belief(rng.dirichlet(np.full(dim, alpha)))
