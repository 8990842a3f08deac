"""Bayes-plausible splittings of a prior and their signal-kernel realization.

A splitting is a finitely supported distribution over posterior beliefs
whose mean is the prior.  The Aumann-Maschler construction turns any
splitting into a state-contingent message kernel that the advisor can
actually play, and Bayes updating of the kernel recovers the posteriors.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .exceptions import (
    InvalidWeightsError,
    NotBayesPlausibleError,
    UndefinedPosteriorError,
)
from .model import Belief, _check_dim

MEAN_TOL = 1e-8
WEIGHT_TOL = 1e-8


class Splitting:
    """Distribution over posteriors with mean equal to the prior.

    Atoms are (weight, posterior) pairs with positive weights summing to
    one; zero-weight atoms are never stored.  Use :func:`make_splitting`
    to build a validated instance.
    """

    __slots__ = ("_prior", "_weights", "_posteriors")

    def __init__(self, prior: Belief, weights: np.ndarray, posteriors: tuple):
        self._prior = prior
        weights = np.asarray(weights, dtype=float)
        weights.flags.writeable = False
        self._weights = weights
        self._posteriors = tuple(posteriors)

    @property
    def prior(self) -> Belief:
        return self._prior

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def posteriors(self) -> tuple:
        return self._posteriors

    @property
    def atoms(self) -> list:
        return list(zip(self._weights.tolist(), self._posteriors))

    @property
    def n_messages(self) -> int:
        return len(self._posteriors)

    @property
    def is_no_disclosure(self) -> bool:
        return len(self._posteriors) == 1

    def mean(self) -> np.ndarray:
        return self._weights @ np.vstack([q.weights for q in self._posteriors])

    def __repr__(self) -> str:
        parts = ", ".join(f"{w:.4g}*{q!r}" for w, q in self.atoms)
        return f"Splitting[{parts}]"


class SignalKernel:
    """State-contingent message distribution, rows indexed by state."""

    __slots__ = ("_P",)

    def __init__(self, message_probabilities):
        P = np.asarray(message_probabilities, dtype=float).copy()
        P[np.abs(P) < 1e-15] = np.abs(P[np.abs(P) < 1e-15])
        P.flags.writeable = False
        self._P = P

    @property
    def message_probabilities(self) -> np.ndarray:
        return self._P

    @property
    def n_messages(self) -> int:
        return self._P.shape[1]

    def __repr__(self) -> str:
        return f"SignalKernel({self._P.shape[0]} states, {self._P.shape[1]} messages)"


def make_splitting(prior: Belief, atoms: Sequence) -> Splitting:
    """Validated splitting from (weight, posterior) pairs.

    Weights must be positive (exact zeros are dropped) and sum to one
    within 1e-8; the weighted mean of the posteriors must equal the prior
    within 1e-8.  Weights are renormalized to sum exactly to one.
    """
    weights = []
    posteriors = []
    for w, q in atoms:
        w = float(w)
        if w < 0.0:
            raise InvalidWeightsError(f"negative atom weight {w}")
        if w == 0.0:
            continue
        q = q if isinstance(q, Belief) else Belief(q)
        _check_dim(q, prior.dim)
        weights.append(w)
        posteriors.append(q)
    if not weights:
        raise InvalidWeightsError("splitting needs at least one atom of positive weight")
    weights = np.asarray(weights)
    total = weights.sum()
    if abs(total - 1.0) > WEIGHT_TOL:
        raise InvalidWeightsError(f"atom weights sum to {total!r}, expected 1")
    weights = weights / total
    mean = weights @ np.vstack([q.weights for q in posteriors])
    err = np.max(np.abs(mean - prior.weights))
    if err > MEAN_TOL:
        raise NotBayesPlausibleError(
            f"mean of posteriors differs from the prior by {err:.3g} (tolerance {MEAN_TOL})")
    return Splitting(prior, weights, posteriors)


def no_disclosure(prior: Belief) -> Splitting:
    """The single-atom splitting that reveals nothing."""
    return Splitting(prior, np.array([1.0]), (prior,))


def signal_kernel(mu: Splitting, prior: Belief) -> SignalKernel:
    """Message kernel realizing the splitting: P(msg j | state w) = w_j q_j(w) / p(w).

    States with zero prior mass receive the unconditional message weights,
    which keeps every row stochastic (any row works there).
    """
    _check_dim(prior, mu.prior.dim)
    Q = np.vstack([q.weights for q in mu.posteriors])      # (messages, states)
    w = mu.weights
    p = prior.weights
    P = np.empty((prior.dim, len(w)))
    pos = p > 0.0
    P[pos, :] = (w[:, None] * Q[:, pos]).T / p[pos, None]
    P[~pos, :] = w
    # guard round-off so rows stay stochastic
    P = np.clip(P, 0.0, None)
    P /= P.sum(axis=1, keepdims=True)
    return SignalKernel(P)


def message_distribution(prior: Belief, kernel: SignalKernel) -> np.ndarray:
    """Unconditional message probabilities under the prior."""
    return prior.weights @ kernel.message_probabilities


def bayes_posterior(prior: Belief, kernel: SignalKernel, message: int) -> Belief:
    """Posterior after observing a message of positive unconditional probability."""
    probs = message_distribution(prior, kernel)
    if message < 0 or message >= kernel.n_messages:
        raise UndefinedPosteriorError(f"message index {message} out of range")
    if probs[message] <= 1e-300:
        raise UndefinedPosteriorError(f"message {message} has zero probability")
    post = prior.weights * kernel.message_probabilities[:, message] / probs[message]
    return Belief(post)
