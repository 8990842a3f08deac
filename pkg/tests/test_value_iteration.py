import numpy as np
import pytest

from persuade import (
    Belief,
    PayoffStructure,
    PolicyValueRequest,
    SimplexGrid,
    ValueField,
    bellman_step,
    concavify,
    extract_splitting,
    greedy_value,
    greedy_value_many,
    interpolate,
    invests,
    renewal_chain,
    solve,
)
from persuade.evaluate import first_best_bound_many
from persuade.experiments import counterexample_instance
from persuade.greedy import max_stage_payoff_many
from persuade.value_iteration import grid_variation, interpolate_many, splitting_value

R2 = PayoffStructure([1.0, -1.0])
R3 = PayoffStructure([2.0, -1.0, -4.0])


def test_interpolate_exact_at_nodes():
    rng = np.random.default_rng(15)
    for dim, n in ((2, 17), (3, 12)):
        grid = SimplexGrid(dim, n)
        field = ValueField(grid, rng.uniform(size=grid.n_nodes))
        vals = interpolate_many(field, grid.nodes)
        assert np.max(np.abs(vals - field.values)) <= 1e-12


def test_interpolate_constant_and_linear():
    grid = SimplexGrid(3, 9)
    const = ValueField(grid, np.full(grid.n_nodes, 0.37))
    rng = np.random.default_rng(16)
    pts = rng.dirichlet(np.ones(3), size=50)
    assert np.max(np.abs(interpolate_many(const, pts) - 0.37)) <= 1e-12

    # a linear field interpolates exactly everywhere
    grid2 = SimplexGrid(2, 40)
    lin = ValueField(grid2, grid2.nodes[:, 0])
    xs = rng.uniform(size=30)
    vals = interpolate_many(lin, np.column_stack([xs, 1 - xs]))
    assert np.max(np.abs(vals - xs)) <= 1e-12

    c = np.array([0.3, -0.2, 0.9])
    lin3 = ValueField(grid, grid.nodes @ c)
    pts = rng.dirichlet(np.ones(3), size=60)
    assert np.max(np.abs(interpolate_many(lin3, pts) - pts @ c)) <= 1e-12


def test_interpolation_preserves_range():
    rng = np.random.default_rng(17)
    grid = SimplexGrid(3, 8)
    field = ValueField(grid, rng.uniform(size=grid.n_nodes))
    pts = rng.dirichlet(np.ones(3), size=200)
    vals = interpolate_many(field, pts)
    assert vals.min() >= field.values.min() - 1e-12
    assert vals.max() <= field.values.max() + 1e-12


def test_concavify_indicator_two_state():
    grid = SimplexGrid(2, 10)
    indicator = (grid.nodes[:, 0] >= 0.5).astype(float)
    env = concavify(ValueField(grid, indicator))
    expected = np.minimum(2 * grid.nodes[:, 0], 1.0)
    assert np.max(np.abs(env.values - expected)) <= 1e-12


def test_concavify_properties():
    rng = np.random.default_rng(18)
    for dim, n in ((2, 60), (3, 20)):
        grid = SimplexGrid(dim, n)
        for _ in range(6):
            field = ValueField(grid, rng.uniform(size=grid.n_nodes))
            env = concavify(field)
            assert np.all(env.values >= field.values - 1e-12)          # dominance
            again = concavify(env)
            assert np.max(np.abs(again.values - env.values)) <= 1e-9   # idempotence

    # concave input is left unchanged: affine and constant lifts are flat
    grid = SimplexGrid(3, 15)
    affine = ValueField(grid, grid.nodes @ np.array([0.2, 0.7, 0.4]))
    env = concavify(affine)
    assert np.max(np.abs(env.values - affine.values)) <= 1e-12
    const = ValueField(grid, np.full(grid.n_nodes, 0.4))
    assert np.array_equal(concavify(const).values, const.values)


def test_bellman_zero_discount_equals_stage_envelope():
    # frontier extreme points of this instance are grid nodes, so the
    # node envelope reproduces the best stage payoff exactly
    grid = SimplexGrid(3, 30)
    chain = renewal_chain(Belief([0.3, 0.5, 0.2]), 0.5)
    zero = ValueField(grid, np.zeros(grid.n_nodes))
    stepped = bellman_step(zero, 0.0, chain, R3)
    rhat = max_stage_payoff_many(grid.nodes, R3)
    assert np.max(np.abs(stepped.values - rhat)) <= 1e-10

    grid2 = SimplexGrid(2, 50)
    chain2 = renewal_chain(Belief([0.5, 0.5]), 0.3)
    res = solve(0.0, chain2, R2, grid2)
    assert np.max(np.abs(res.field.values
                         - max_stage_payoff_many(grid2.nodes, R2))) <= 1e-10


def test_bellman_monotone_and_contracting():
    rng = np.random.default_rng(19)
    grid = SimplexGrid(3, 15)
    chain = renewal_chain(Belief([0.3, 0.5, 0.2]), 0.5)
    delta = 0.7
    for _ in range(10):
        v = rng.uniform(size=grid.n_nodes)
        w = rng.uniform(size=grid.n_nodes)
        Tv = bellman_step(ValueField(grid, v), delta, chain, R3).values
        Tw = bellman_step(ValueField(grid, w), delta, chain, R3).values
        assert np.max(np.abs(Tv - Tw)) <= delta * np.max(np.abs(v - w)) + 1e-9
        lo = np.minimum(v, w)
        Tlo = bellman_step(ValueField(grid, lo), delta, chain, R3).values
        assert np.all(Tlo <= Tv + 1e-12)
        assert np.all(Tlo <= Tw + 1e-12)


def test_solve_fixed_point_residual():
    grid = SimplexGrid(3, 40)
    chain = renewal_chain(Belief([0.3, 0.5, 0.2]), 0.5)
    delta, eps = 0.6, 1e-5
    res = solve(delta, chain, R3, grid, eps)
    stepped = bellman_step(res.field, delta, chain, R3)
    assert np.max(np.abs(stepped.values - res.field.values)) <= (1 - delta) * eps
    assert res.iterations >= 1


def test_solve_matches_greedy_two_state():
    rng = np.random.default_rng(20)
    from persuade.experiments import sample_two_state_instance
    payoffs, chain, delta = sample_two_state_instance(rng, 1)
    grid = SimplexGrid(2, 2000)
    res = solve(delta, chain, payoffs, grid, 1e-6)
    gam, _ = greedy_value_many(grid.nodes, delta, chain, payoffs, tol=1e-6)
    assert np.max(np.abs(res.field.values - gam)) <= 5e-3


def test_value_brackets_by_greedy_and_first_best():
    grid = SimplexGrid(3, 40)
    chain = renewal_chain(Belief([0.3, 0.5, 0.2]), 0.5)
    delta = 0.6
    res = solve(delta, chain, R3, grid, 1e-5)
    gam, ge = greedy_value_many(grid.nodes, delta, chain, R3, tol=1e-7)
    star, se = first_best_bound_many(grid.nodes, delta, chain, R3, tol=1e-7)
    gridtol = grid_variation(res.field) + 1e-4
    assert np.all(res.field.values >= gam - ge - gridtol)
    assert np.all(res.field.values <= star + se + gridtol)


def test_solve_beats_greedy_on_counterexample():
    cfg = counterexample_instance(0.01, 0.5, 0.5)
    payoffs, chain, p1 = cfg.payoffs(), cfg.chain(), cfg.initial()
    grid = SimplexGrid(3, 90)
    res = solve(0.5, chain, payoffs, grid, 1e-4)
    req = PolicyValueRequest(p1, 0.5, chain, payoffs, tol=1e-8)
    assert interpolate(res.field, p1) > greedy_value(req) + 0.05


def test_grid_refinement_is_lipschitz_in_h():
    chain = renewal_chain(Belief([0.3, 0.5, 0.2]), 0.5)
    delta = 0.6
    coarse = solve(delta, chain, R3, SimplexGrid(3, 30), 1e-5)
    fine = solve(delta, chain, R3, SimplexGrid(3, 60), 1e-5)
    # coarse nodes are a subset of fine nodes
    vals_fine_at_coarse = interpolate_many(fine.field, SimplexGrid(3, 30).nodes)
    change = np.max(np.abs(vals_fine_at_coarse - coarse.field.values))
    assert change <= 5.0 * (1.0 / 30)


def test_extract_splitting_no_disclosure_on_investment_region():
    grid = SimplexGrid(3, 30)
    chain = renewal_chain(Belief([0.3, 0.5, 0.2]), 0.5)
    res = solve(0.6, chain, R3, grid, 1e-5)
    p = Belief([0.9, 0.05, 0.05])
    mu = extract_splitting(p, res.field, 0.6, chain, R3)
    assert mu.is_no_disclosure and mu.posteriors[0] == p


def test_extract_splitting_two_state_cutoff():
    chain = renewal_chain(Belief([0.6, 0.4]), 0.4)
    grid = SimplexGrid(2, 100)
    res = solve(0.5, chain, R2, grid, 1e-6)
    mu = extract_splitting(Belief([0.25, 0.75]), res.field, 0.5, chain, R2)
    atoms = sorted(mu.atoms, key=lambda a: a[1][0])
    assert len(atoms) == 2
    assert atoms[0][1].isclose(Belief([0.0, 1.0]), 1e-9)
    assert atoms[1][1].isclose(Belief([0.5, 0.5]), 1e-9)
    assert atoms[0][0] == pytest.approx(0.5, abs=1e-9)


def test_extract_splitting_achieves_field_value():
    rng = np.random.default_rng(21)
    chain = renewal_chain(Belief([0.3, 0.5, 0.2]), 0.5)
    delta = 0.6
    grid = SimplexGrid(3, 60)
    res = solve(delta, chain, R3, grid, 1e-5)
    gridtol = grid_variation(res.field)
    for _ in range(25):
        p = Belief(rng.dirichlet(np.ones(3)))
        mu = extract_splitting(p, res.field, delta, chain, R3)
        assert len(mu.posteriors) <= 2
        assert np.max(np.abs(mu.mean() - p.weights)) <= 1e-9
        achieved = splitting_value(mu, res.field, delta, chain, R3)
        target = interpolate(res.field, p)
        assert achieved >= target - 2 * gridtol
        assert achieved <= target + 2 * gridtol
