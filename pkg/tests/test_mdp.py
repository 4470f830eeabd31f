import json
from collections import deque

import numpy as np
import pytest

from conftest import chain, grid, monte_carlo_occupancy, single_state
from rewardprivacy import io
from rewardprivacy.errors import DimensionMismatch, EmptyDemonstrations
from rewardprivacy.mdp import (MixedPolicy, TabularMdp, causal_entropy, deterministic_policy, empirical_occupancy,
                               expected_return, flow_residual, horizon_for, mix_policies, occupancy_of_policy,
                               policy_of_occupancy, policy_return, random_mdp, random_policy, sample_trajectories,
                               solve_optimal, solve_soft, uniform_policy, validate_mdp)


# validation

def test_two_state_mdp_is_valid():
    P = np.array([[[0.3, 0.7]], [[0.6, 0.4]]])
    mdp = TabularMdp(P, np.zeros((2, 1)), 0.9, np.array([0.5, 0.5]))
    assert validate_mdp(mdp).ok


def test_row_summing_to_point_nine_is_reported():
    P = np.array([[[0.5, 0.4]], [[0.5, 0.5]]])
    report = validate_mdp(TabularMdp(P, np.zeros((2, 1)), 0.9, np.array([0.5, 0.5])))
    assert not report.ok
    assert [(v.kind, v.location) for v in report.violations] == [("NonStochasticRow", (0, 0))]


def test_unreachable_state_is_reported():
    P = np.zeros((3, 2, 3))
    P[0, :, 1] = 1.0
    P[1, :, 0] = 1.0
    P[2, :, 0] = 1.0  # state 2 leaves but nothing enters
    report = validate_mdp(TabularMdp(P, np.zeros((3, 2)), 0.9, np.array([0.5, 0.5, 0.0])))
    assert report.kinds() == ["UnreachableState"]
    assert report.violations[0].location == (2,)


def test_bad_initial_dist_and_negative_row():
    P = np.array([[[1.2, -0.2]], [[0.0, 1.0]]])
    report = validate_mdp(TabularMdp(P, np.zeros((2, 1)), 0.5, np.array([0.7, 0.7])))
    assert set(report.kinds()) >= {"NegativeTransition", "InvalidInitialDist"}


def test_shape_errors():
    with pytest.raises(DimensionMismatch):
        TabularMdp(np.ones((2, 1, 2)) / 2, np.zeros((3, 1)), 0.9, np.array([0.5, 0.5]))
    with pytest.raises(ValueError):
        TabularMdp(np.ones((1, 1, 1)), np.zeros((1, 1)), 1.0, np.ones(1))


def test_mdp_arrays_are_read_only():
    mdp = single_state([0.0, 1.0])
    with pytest.raises(ValueError):
        mdp.reward[0, 0] = 5.0


# occupancy

def test_self_loop_occupancy_is_one():
    rho = occupancy_of_policy(single_state([0.0]), np.ones((1, 1)))
    assert rho == pytest.approx(np.array([[1.0]]), abs=1e-15)


def test_chain_occupancy_by_geometric_series():
    rho = occupancy_of_policy(chain(0.5), np.ones((2, 1)))
    np.testing.assert_allclose(rho, [[0.5], [0.5]], atol=1e-15)


def test_uniform_policy_occupancy_has_unit_mass(small_mdp):
    rho = occupancy_of_policy(small_mdp, uniform_policy(*small_mdp.shape))
    assert rho.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.max(np.abs(flow_residual(small_mdp, rho))) <= 1e-12


def test_occupancy_matches_monte_carlo(small_mdp, rng):
    pi = random_policy(*small_mdp.shape, rng)
    rho = occupancy_of_policy(small_mdp, pi)
    mc = monte_carlo_occupancy(small_mdp, pi, 20_000, horizon_for(small_mdp.gamma), rng)
    assert np.abs(rho - mc).sum() <= 0.03


def test_policy_of_occupancy_examples():
    pi = policy_of_occupancy(np.array([[0.3, 0.1], [0.6, 0.0]]))
    np.testing.assert_allclose(pi, [[0.75, 0.25], [1.0, 0.0]])
    pi = policy_of_occupancy(np.array([[0.0, 0.0, 0.0], [0.2, 0.3, 0.5]]))
    np.testing.assert_allclose(pi[0], [1 / 3, 1 / 3, 1 / 3])


def test_policy_occupancy_roundtrip(small_mdp, rng):
    pi = random_policy(*small_mdp.shape, rng)
    back = policy_of_occupancy(occupancy_of_policy(small_mdp, pi))
    np.testing.assert_allclose(back, pi, atol=1e-10)


def test_expected_return_examples(small_mdp):
    rho = occupancy_of_policy(small_mdp, uniform_policy(*small_mdp.shape))
    assert expected_return(rho, np.full(small_mdp.shape, 3.5)) == pytest.approx(3.5)
    assert policy_return(single_state([2.0]), np.ones((1, 1))) == pytest.approx(2.0)
    with pytest.raises(DimensionMismatch):
        expected_return(rho, np.zeros((2, 2)))


def test_expected_return_matches_discounted_monte_carlo(rng):
    mdp = random_mdp(5, 2, 0.8, seed=3)
    pi = random_policy(5, 2, rng)
    trajs = sample_trajectories(mdp, pi, 50_000, horizon_for(mdp.gamma), seed=9)
    disc = mdp.gamma ** np.arange(trajs[0].horizon)
    returns = np.array([(1 - mdp.gamma) * t.rewards @ disc for t in trajs])
    se = returns.std(ddof=1) / np.sqrt(len(returns))
    assert abs(returns.mean() - policy_return(mdp, pi)) <= max(3 * se, 0.02)


def test_causal_entropy_examples(small_mdp):
    S, A = small_mdp.shape
    det = deterministic_policy(np.zeros(S, dtype=int), A)
    assert causal_entropy(occupancy_of_policy(small_mdp, det)) == 0.0
    uni = occupancy_of_policy(small_mdp, uniform_policy(S, A))
    assert causal_entropy(uni) == pytest.approx(np.log(A), abs=1e-12)
    half = occupancy_of_policy(single_state([0.0, 0.0]), np.array([[0.5, 0.5]]))
    assert causal_entropy(half) == pytest.approx(0.6931471805599453, abs=1e-12)


# planning

def test_solve_optimal_dominant_action():
    pi, q = solve_optimal(single_state([0.0, 1.0]), tol=1e-8)
    np.testing.assert_array_equal(pi, [[0.0, 1.0]])
    assert q.shape == (1, 2)


def test_solve_optimal_myopic_limit(rng):
    mdp = random_mdp(7, 4, 0.0, seed=5)
    pi, _ = solve_optimal(mdp, tol=1e-8)
    np.testing.assert_array_equal(pi.argmax(axis=1), mdp.reward.argmax(axis=1))


def test_solve_optimal_follows_bfs_shortest_paths():
    n = 5
    mdp = grid(n, goal=(2, 3))
    pi, _ = solve_optimal(mdp, tol=1e-10)
    goal = 2 * n + 3
    # BFS hop distances to the goal on the grid graph
    dist = {goal: 0}
    queue = deque([goal])
    while queue:
        s = queue.popleft()
        r, c = divmod(s, n)
        for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            if 0 <= rr < n and 0 <= cc < n and rr * n + cc not in dist:
                dist[rr * n + cc] = dist[s] + 1
                queue.append(rr * n + cc)
    for s in range(n * n):
        if s == goal:
            continue
        nxt = int(np.argmax(mdp.transition[s, int(pi[s].argmax())]))
        assert dist[nxt] == dist[s] - 1


def test_solve_optimal_rejects_bad_tol(small_mdp):
    with pytest.raises(ValueError):
        solve_optimal(small_mdp, tol=0.0)


def test_tie_break_is_lowest_index():
    pi, _ = solve_optimal(single_state([1.0, 1.0, 0.5]))
    np.testing.assert_array_equal(pi, [[1.0, 0.0, 0.0]])


def test_solve_soft_examples(small_mdp):
    pi = solve_soft(small_mdp, np.zeros(small_mdp.shape))
    np.testing.assert_allclose(pi, 1.0 / small_mdp.n_actions)
    pi = solve_soft(single_state([0.0, 1.0], gamma=0.0))
    np.testing.assert_allclose(pi, [[0.2689414213699951, 0.7310585786300049]], atol=1e-12)


def test_soft_policy_strictly_positive(small_mdp):
    pi = solve_soft(small_mdp, 5 * small_mdp.reward)
    assert np.all(pi > 0)
    np.testing.assert_allclose(pi.sum(axis=1), 1.0)


@pytest.mark.parametrize("scale", [1e2, 1e4, 1e6])
def test_soft_to_hard_limit(scale):
    mdp = random_mdp(8, 3, 0.9, seed=21)
    hard, _ = solve_optimal(mdp)
    soft = solve_soft(mdp, scale * mdp.reward)
    assert np.array_equal(soft.argmax(axis=1), hard.argmax(axis=1))


# sampling

def test_sampling_is_deterministic(small_mdp):
    pi = uniform_policy(*small_mdp.shape)
    a = sample_trajectories(small_mdp, pi, 5, 20, seed=7)
    b = sample_trajectories(small_mdp, pi, 5, 20, seed=7)
    assert all(np.array_equal(x.states, y.states) and np.array_equal(x.actions, y.actions) for x, y in zip(a, b))
    assert all(len(t) == 20 for t in a)


def test_deterministic_world_gives_identical_trajectories():
    mdp = grid(4)
    mdp = TabularMdp(mdp.transition, mdp.reward, mdp.gamma, np.eye(16)[0])
    pi, _ = solve_optimal(mdp)
    trajs = sample_trajectories(mdp, pi, 6, 15, seed=1)
    assert all(t.steps == trajs[0].steps for t in trajs)


def test_next_state_frequencies_match_transitions(small_mdp):
    pi = uniform_policy(*small_mdp.shape)
    trajs = sample_trajectories(small_mdp, pi, 1000, 101, seed=2)
    S = small_mdp.n_states
    counts = np.zeros((S, small_mdp.n_actions, S))
    for t in trajs:
        np.add.at(counts, (t.states[:-1], t.actions[:-1], t.states[1:]), 1)
    freq = counts / counts.sum(axis=2, keepdims=True)
    l1 = np.abs(freq - small_mdp.transition).sum(axis=2)
    assert l1.max() <= 0.1  # per row sample sizes are ~5.5k
    assert np.average(l1, weights=counts.sum(axis=2)) <= 0.02


def test_mixed_policy_samples_one_member_per_episode():
    mdp = single_state([0.0, 0.0])
    mixed = MixedPolicy((np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])), np.array([0.3, 0.7]))
    trajs = sample_trajectories(mdp, mixed, 4000, 10, seed=3)
    firsts = np.array([t.actions[0] for t in trajs])
    assert all(len(set(t.actions.tolist())) == 1 for t in trajs)
    assert abs(firsts.mean() - 0.7) < 0.03


def test_sampling_argument_errors(small_mdp):
    with pytest.raises(ValueError):
        sample_trajectories(small_mdp, uniform_policy(*small_mdp.shape), 0, 5, seed=0)


# empirical occupancy

def test_empirical_occupancy_self_loop():
    mdp = single_state([1.0], gamma=0.9)
    h = horizon_for(0.9, 1e-9)
    rho = empirical_occupancy(sample_trajectories(mdp, np.ones((1, 1)), 1, h, seed=0), 0.9)
    np.testing.assert_allclose(rho, occupancy_of_policy(mdp, np.ones((1, 1))), atol=1e-6)


def test_empirical_occupancy_converges(rng):
    mdp = random_mdp(6, 2, 0.9, seed=8)
    pi = random_policy(6, 2, rng)
    trajs = sample_trajectories(mdp, pi, 10_000, horizon_for(mdp.gamma), seed=4)
    rho_hat = empirical_occupancy(trajs, mdp.gamma)
    assert rho_hat.sum() == pytest.approx(1.0)
    assert np.abs(rho_hat - occupancy_of_policy(mdp, pi)).sum() <= 0.02


def test_empty_demonstrations():
    with pytest.raises(EmptyDemonstrations):
        empirical_occupancy([], 0.9)


# mixtures

def test_mixture_examples(small_mdp, rng):
    a = random_policy(*small_mdp.shape, rng)
    b = random_policy(*small_mdp.shape, rng)
    _, rho = mix_policies([a, b], [1.0, 0.0], small_mdp)
    np.testing.assert_array_equal(rho, occupancy_of_policy(small_mdp, a))
    _, rho = mix_policies([a, b], [0.5, 0.5], small_mdp)
    assert rho.sum() == pytest.approx(1.0)
    assert expected_return(rho, small_mdp.reward) == pytest.approx(
        0.5 * policy_return(small_mdp, a) + 0.5 * policy_return(small_mdp, b))


def test_mixture_of_returns_one_and_three():
    mdp = single_state([1.0, 3.0])
    mixed, rho = mix_policies([np.array([[1.0, 0.0]]), np.array([[0.0, 1.0]])], [0.5, 0.5], mdp)
    assert expected_return(rho, mdp.reward) == pytest.approx(2.0)


def test_mixture_errors(small_mdp):
    with pytest.raises(DimensionMismatch):
        mix_policies([np.ones((2, 2)) / 2], [1.0], small_mdp)
    with pytest.raises(ValueError):
        MixedPolicy((np.ones((1, 1)),), np.array([0.5]))


# serialisation

def test_mdp_json_roundtrip_is_bit_exact(small_mdp, tmp_path):
    path = io.write_json(io.mdp_to_dict(small_mdp), tmp_path / "mdp.json")
    back = io.mdp_from_dict(io.read_json(path))
    assert np.array_equal(back.transition, small_mdp.transition)
    assert np.array_equal(back.reward, small_mdp.reward)
    assert back.gamma == small_mdp.gamma
    assert io.dumps(io.mdp_to_dict(back)) == path.read_text()


def test_policy_json_roundtrip(rng):
    mixed = MixedPolicy((random_policy(3, 2, rng), random_policy(3, 2, rng)), np.array([0.25, 0.75]))
    back = io.policy_from_dict(json.loads(io.dumps(io.policy_to_dict(mixed))))
    assert all(np.array_equal(x, y) for x, y in zip(back.members, mixed.members))
    assert np.array_equal(back.weights, mixed.weights)
