import numpy as np
import pytest

from persuade import (
    Belief,
    InvalidWeightsError,
    NotBayesPlausibleError,
    UndefinedPosteriorError,
    bayes_posterior,
    make_splitting,
    message_distribution,
    no_disclosure,
    signal_kernel,
)


def test_make_splitting_validation():
    prior = Belief([0.25, 0.75])
    mu = make_splitting(prior, [(0.5, Belief([0.5, 0.5])), (0.5, Belief([0.0, 1.0]))])
    assert mu.n_messages == 2
    assert np.allclose(mu.mean(), prior.weights)

    single = make_splitting(prior, [(1.0, prior)])
    assert single.is_no_disclosure

    with pytest.raises(NotBayesPlausibleError):
        make_splitting(prior, [(0.5, Belief([0.6, 0.4])), (0.5, Belief([0.0, 1.0]))])
    with pytest.raises(InvalidWeightsError):
        make_splitting(prior, [(0.7, Belief([0.5, 0.5])), (0.7, Belief([0.0, 1.0]))])
    with pytest.raises(InvalidWeightsError):
        make_splitting(prior, [(-0.2, prior), (1.2, prior)])

    # zero-weight atoms are dropped, never stored
    mu = make_splitting(prior, [(1.0, prior), (0.0, Belief([1.0, 0.0]))])
    assert mu.n_messages == 1


def test_signal_kernel_worked_example():
    prior = Belief([0.25, 0.75])
    mu = make_splitting(prior, [(0.5, Belief([0.5, 0.5])), (0.5, Belief([0.0, 1.0]))])
    K = signal_kernel(mu, prior)
    assert K.message_probabilities[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert K.message_probabilities[1, 0] == pytest.approx(1 / 3, abs=1e-12)
    assert np.allclose(K.message_probabilities.sum(axis=1), 1.0)


def test_no_disclosure_kernel_is_degenerate():
    prior = Belief([0.3, 0.7])
    K = signal_kernel(no_disclosure(prior), prior)
    assert np.allclose(K.message_probabilities, 1.0)
    assert bayes_posterior(prior, K, 0).isclose(prior)


def test_bayes_posterior_basics():
    prior = Belief([0.4, 0.6])
    uninformative = signal_kernel(
        make_splitting(prior, [(0.5, prior), (0.5, prior)]), prior)
    assert bayes_posterior(prior, uninformative, 1).isclose(prior, 1e-12)

    # fully revealing kernel: message = state
    from persuade.splitting import SignalKernel
    K = SignalKernel(np.eye(2))
    assert bayes_posterior(prior, K, 0).isclose(Belief([1.0, 0.0]), 1e-12)
    with pytest.raises(UndefinedPosteriorError):
        bayes_posterior(Belief([1.0, 0.0]), K, 1)


def test_counterexample_second_round_split():
    # prior (eps, 1/2, 1/2-eps) split between (eps,1-eps,0) and (eps,0,1-eps):
    # the first message arrives with probability 1/(2(1-eps))
    eps = 0.01
    prior = Belief([eps, 0.5, 0.5 - eps])
    w1 = 1.0 / (2.0 * (1.0 - eps))
    mu = make_splitting(prior, [(w1, Belief([eps, 1 - eps, 0.0])),
                                (1.0 - w1, Belief([eps, 0.0, 1 - eps]))])
    K = signal_kernel(mu, prior)
    probs = message_distribution(prior, K)
    assert probs[0] == pytest.approx(w1, abs=1e-12)
    for j, q in enumerate(mu.posteriors):
        assert bayes_posterior(prior, K, j).isclose(q, 1e-12)


def test_round_trip_and_total_probability():
    rng = np.random.default_rng(4)
    for _ in range(50):
        dim = rng.integers(2, 6)
        k = rng.integers(1, 5)
        posts = rng.dirichlet(np.ones(dim), size=k)
        weights = rng.dirichlet(np.ones(k))
        prior = Belief(weights @ posts)
        mu = make_splitting(prior, list(zip(weights, map(Belief, posts))))
        K = signal_kernel(mu, prior)
        probs = message_distribution(prior, K)
        assert np.max(np.abs(probs - mu.weights)) <= 1e-10
        recovered = np.zeros(dim)
        for j, q in enumerate(mu.posteriors):
            post = bayes_posterior(prior, K, j)
            assert post.isclose(q, 1e-10)
            recovered += probs[j] * post.weights
        assert np.max(np.abs(recovered - prior.weights)) <= 1e-10


def test_zero_mass_states_get_unconditional_weights():
    prior = Belief([0.5, 0.5, 0.0])
    mu = make_splitting(prior, [(0.5, Belief([1, 0, 0])), (0.5, Belief([0, 1, 0]))])
    K = signal_kernel(mu, prior)
    assert np.allclose(K.message_probabilities[2], mu.weights)
