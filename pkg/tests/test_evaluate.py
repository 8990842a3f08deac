import numpy as np
import pytest

from persuade import (
    Belief,
    NotApplicableError,
    PayoffStructure,
    PolicyValueRequest,
    breakpoints,
    drift,
    drift_bound,
    entry_time,
    excess,
    first_best_bound,
    greedy_value,
    greedy_value_many,
    invests,
    p_polytope,
    p_polytope_contains,
    renewal_chain,
    simulate_play,
)
from persuade.evaluate import (
    excess_many,
    first_best_bound_many,
    simulate_discounted_payoffs,
    simulate_entry_times,
)
from persuade.experiments import counterexample_instance
from persuade.greedy import max_stage_payoff

R3 = PayoffStructure([2.0, -1.0, -4.0])


def _counterexample():
    cfg = counterexample_instance(0.01, 0.5, 0.5)
    return cfg.payoffs(), cfg.chain(), cfg.initial()


def test_greedy_value_absorbing_investment_region():
    # the invariant invests, so investing beliefs never leave the region
    m = Belief([0.8, 0.1, 0.1])
    chain = renewal_chain(m, 0.5)
    assert invests(m, R3)
    for p in (Belief([0.9, 0.05, 0.05]), m, Belief([0.7, 0.2, 0.1])):
        assert invests(p, R3)
        req = PolicyValueRequest(p, 0.7, chain, R3, tol=1e-9)
        assert greedy_value(req) == pytest.approx(1.0, abs=1e-8)


def test_greedy_value_counterexample():
    payoffs, chain, p1 = _counterexample()
    req = PolicyValueRequest(Belief([0, 0, 1]), 0.5, chain, payoffs, tol=1e-9)
    assert greedy_value(req) == pytest.approx(0.0, abs=1e-8)
    req1 = PolicyValueRequest(p1, 0.5, chain, payoffs, tol=1e-9)
    assert greedy_value(req1) <= 4 * 0.01 + 1e-8


def test_truncation_depth_guarantee():
    m = Belief([0.3, 0.5, 0.2])
    chain = renewal_chain(m, 0.5)
    for delta, tol in ((0.5, 1e-6), (0.9, 1e-4), (0.0, 1e-6)):
        req = PolicyValueRequest(m, delta, chain, R3, tol=tol)
        assert delta ** req.truncation_depth() <= tol


def test_truncation_soundness():
    payoffs, chain, p1 = _counterexample()
    delta = 0.5
    for depth in (12, 18):
        a, _ = greedy_value_many(p1.weights[None, :], delta, chain, payoffs, depth=depth)
        b, _ = greedy_value_many(p1.weights[None, :], delta, chain, payoffs, depth=2 * depth)
        assert abs(a[0] - b[0]) < delta ** depth


def test_greedy_value_is_deterministic():
    m = Belief([0.25, 0.45, 0.3])
    chain = renewal_chain(m, 0.6)
    rng = np.random.default_rng(33)
    P = rng.dirichlet(np.ones(3), size=20)
    a, _ = greedy_value_many(P, 0.7, chain, R3, tol=1e-8)
    b, _ = greedy_value_many(P, 0.7, chain, R3, tol=1e-8)
    assert np.array_equal(a, b)


def test_excess():
    # on the investment region the advantage is exactly the stage payoff
    m = Belief([0.8, 0.1, 0.1])
    chain = renewal_chain(m, 0.5)
    req = PolicyValueRequest(m, 0.6, chain, R3, tol=1e-10)
    assert excess(Belief([0.9, 0.05, 0.05]), req) == pytest.approx(0.4, abs=1e-8)

    # two-state: at the worst vertex the greedy value is pure continuation
    r2 = PayoffStructure([1.0, -1.0])
    chain2 = renewal_chain(Belief([0.4, 0.6]), 0.5)
    req2 = PolicyValueRequest(Belief([0.4, 0.6]), 0.6, chain2, r2, tol=1e-10)
    assert excess(Belief([0.0, 1.0]), req2) == pytest.approx(0.0, abs=1e-8)

    # any belief carried by the negative states has zero excess
    req3 = PolicyValueRequest(m, 0.6, chain, R3, tol=1e-10)
    assert excess(Belief([0.0, 0.3, 0.7]), req3) == pytest.approx(0.0, abs=1e-8)


def test_excess_zero_at_breakpoints():
    bp_payoffs = R3
    m = Belief(0.25 * np.array([2 / 3, 0, 1 / 3]) + 0.3 * np.array([1 / 3, 2 / 3, 0])
               + 0.45 * np.array([0.0, 0.0, 1.0]))
    chain = renewal_chain(m, 0.8)
    seq = breakpoints(chain, bp_payoffs)
    assert seq.K >= 2
    req = PolicyValueRequest(m, 0.6, chain, bp_payoffs, tol=1e-10)
    for o in seq.o_points[1:]:
        assert excess(o, req) == pytest.approx(0.0, abs=1e-8)


def test_first_best_bound():
    m = Belief([0.3, 0.5, 0.2])
    p1 = Belief([0.2, 0.5, 0.3])
    # zero discount: only the first round matters
    chain = renewal_chain(m, 0.5)
    req = PolicyValueRequest(p1, 0.0, chain, R3)
    assert first_best_bound(req) == pytest.approx(max_stage_payoff(p1, R3), abs=1e-12)

    # i.i.d. chain: geometric series with the invariant after round one
    iid = renewal_chain(m, 0.0)
    delta = 0.6
    req = PolicyValueRequest(p1, delta, iid, R3, tol=1e-9)
    expected = (1 - delta) * max_stage_payoff(p1, R3) + delta * max_stage_payoff(m, R3)
    assert first_best_bound(req) == pytest.approx(expected, abs=1e-8)


def test_first_best_dominates_greedy():
    rng = np.random.default_rng(11)
    for _ in range(10):
        dim = int(rng.integers(2, 5))
        while True:
            r = rng.uniform(-2, 2, size=dim)
            if (r >= 0).any() and (r < 0).any():
                break
        payoffs = PayoffStructure(r)
        chain = renewal_chain(Belief(rng.dirichlet(np.ones(dim))), rng.uniform(0, 0.8))
        delta = rng.uniform(0.1, 0.8)
        P = rng.dirichlet(np.ones(dim), size=8)
        g, ge = greedy_value_many(P, delta, chain, payoffs, tol=1e-8)
        s, se = first_best_bound_many(P, delta, chain, payoffs, tol=1e-8)
        assert np.all(g <= s + ge + se + 1e-12)


def test_simulate_play_deterministic_and_consistent():
    payoffs, chain, p1 = _counterexample()
    req = PolicyValueRequest(p1, 0.5, chain, payoffs)
    rec1 = simulate_play(req, "greedy", seed=42, horizon=25)
    rec2 = simulate_play(req, "greedy", seed=42, horizon=25)
    assert np.array_equal(rec1.posteriors, rec2.posteriors)
    assert np.array_equal(rec1.states, rec2.states)
    assert rec1.discounted_payoff == rec2.discounted_payoff
    # invest flag matches the posterior's sign
    flags = (rec1.posteriors @ payoffs.r) >= -1e-12
    assert np.array_equal(flags, rec1.invested)


def test_no_disclosure_payoff_is_deterministic():
    m = Belief([0.3, 0.5, 0.2])
    chain = renewal_chain(m, 0.5)
    p1 = Belief([0.6, 0.3, 0.1])
    delta, horizon = 0.6, 40
    req = PolicyValueRequest(p1, delta, chain, R3)
    expected = 0.0
    p = p1
    for n in range(horizon):
        if invests(p, R3):
            expected += (1 - delta) * delta ** n
        p = drift(p, chain)
    for seed in (0, 1):
        rec = simulate_play(req, "no-disclosure", seed=seed, horizon=horizon)
        assert rec.discounted_payoff == pytest.approx(expected, abs=1e-12)


def test_monte_carlo_matches_tree_value():
    m = Belief([0.25, 0.45, 0.3])
    chain = renewal_chain(m, 0.4)
    p1 = Belief([0.3, 0.4, 0.3])
    delta = 0.6
    req = PolicyValueRequest(p1, delta, chain, R3, tol=1e-8)
    gamma = greedy_value(req)
    horizon = req.truncation_depth()
    n = 100_000
    payoffs = simulate_discounted_payoffs(req, "greedy", n, seed=13, horizon=horizon)
    se = payoffs.std(ddof=1) / np.sqrt(n)
    assert abs(payoffs.mean() - gamma) <= 3 * se + delta ** horizon


def test_full_disclosure_policy_runs():
    payoffs, chain, p1 = _counterexample()
    req = PolicyValueRequest(p1, 0.5, chain, payoffs)
    rec = simulate_play(req, "full-disclosure", seed=3, horizon=10)
    # after full disclosure the posterior is a vertex
    assert np.all(np.max(rec.posteriors, axis=1) > 0.999999)


def test_entry_time_and_drift_bound():
    m = Belief([0.35, 0.45, 0.2])
    chain = renewal_chain(m, 0.5)
    assert not invests(m, R3)
    bounds = p_polytope(m, R3)
    req = PolicyValueRequest(m, 0.6, chain, R3)
    rec = simulate_play(req, "greedy", seed=7, horizon=20)
    result = entry_time(rec, R3, bounds, chain)
    assert result.theta == 1           # the invariant already sits inside
    assert result.n_bar is not None and result.n_bar >= 1

    # lam = 0 sends every belief to the invariant in one step
    assert drift_bound(renewal_chain(m, 0.0), R3, bounds) == 1


def test_greedy_entry_is_finite_on_simulated_play():
    rng = np.random.default_rng(14)
    m = Belief([0.3, 0.55, 0.15])
    chain = renewal_chain(m, 0.6)
    bounds = p_polytope(m, R3)
    n_bar = drift_bound(chain, R3, bounds)
    p1 = Belief(rng.dirichlet(np.ones(3)))
    req = PolicyValueRequest(p1, 0.5, chain, R3)
    theta = simulate_entry_times(req, bounds, 3000, seed=21, horizon=10 * n_bar)
    assert np.all(theta > 0)
    assert theta.max() <= 10 * n_bar


def test_breakpoints_construction():
    b_plus = np.array([1 / 3, 2 / 3, 0.0])
    c_plus = np.array([2 / 3, 0.0, 1 / 3])
    m = Belief(0.25 * c_plus + 0.3 * b_plus + 0.45 * np.array([0.0, 0.0, 1.0]))

    # strong persistence: several breakpoints, ordered from the worst vertex
    seq = breakpoints(renewal_chain(m, 0.8), R3)
    assert seq.K >= 3
    assert seq.o_points[0] == Belief([0.0, 0.0, 1.0])
    weights_on_worst = [o[2] for o in seq.o_points]
    assert all(a > b for a, b in zip(weights_on_worst, weights_on_worst[1:]))
    for o, p in zip(seq.o_points, seq.p_points):
        assert drift(o, renewal_chain(m, 0.8)).isclose(p, 1e-10)
    # every interior breakpoint stays on the worst edge
    for o in seq.o_points:
        assert o[0] <= 1e-12
    # drifted breakpoints sit on the segment from the frontier vertex to the
    # previous breakpoint, and all on one line parallel to the negative edge
    bp = np.asarray(seq.b_plus)
    for k in range(1, seq.K):
        prev = np.asarray(seq.o_points[k - 1])
        pk = np.asarray(seq.p_points[k])
        u = (pk[0] - bp[0]) / (prev[0] - bp[0])
        assert 0.0 <= u <= 1.0
        assert np.max(np.abs(bp + u * (prev - bp) - pk)) <= 1e-10
    a_weights = [p[0] for p in seq.p_points]
    assert np.max(a_weights) - np.min(a_weights) <= 1e-12

    # weak persistence: the drift of the better vertex lands in the covered
    # triangle immediately
    assert breakpoints(renewal_chain(m, 0.05), R3).K == 1

    with pytest.raises(NotApplicableError):
        breakpoints(renewal_chain(Belief([0.5, 0.5]), 0.5), PayoffStructure([1.0, -1.0]))
    with pytest.raises(NotApplicableError):
        breakpoints(renewal_chain(Belief([1 / 3, 1 / 3, 1 / 3]), 0.5),
                    PayoffStructure([1.0, 2.0, -1.0]))


def test_two_state_greedy_value_is_affine_below_cutoff():
    r = PayoffStructure([1.0, -1.0])      # cutoff at 1/2
    chain = renewal_chain(Belief([0.55, 0.45]), 0.45)
    delta = 0.7
    xs = np.array([0.1, 0.25, 0.4])
    P = np.column_stack([xs, 1 - xs])
    vals, err = greedy_value_many(P, delta, chain, r, tol=1e-10)
    # three collinear points: the middle one interpolates the other two
    lam = (xs[1] - xs[0]) / (xs[2] - xs[0])
    assert vals[1] == pytest.approx((1 - lam) * vals[0] + lam * vals[2], abs=1e-8)
