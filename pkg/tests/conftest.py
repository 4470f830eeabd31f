import numpy as np
import pytest

from rewardprivacy.mdp import TabularMdp, random_mdp


def chain(gamma=0.5):
    """s0 -> s1, s1 absorbing, one action, start at s0."""
    P = np.zeros((2, 1, 2))
    P[0, 0, 1] = 1.0
    P[1, 0, 1] = 1.0
    return TabularMdp(P, np.zeros((2, 1)), gamma, np.array([1.0, 0.0]))


def single_state(rewards, gamma=0.9):
    rewards = np.atleast_2d(np.asarray(rewards, dtype=float))
    A = rewards.shape[1]
    return TabularMdp(np.ones((1, A, 1)), rewards, gamma, np.array([1.0]))


def grid(n=5, goal=None, gamma=0.9):
    """Deterministic n x n grid (N, E, S, W), rewarding absorbing goal cell."""
    goal = (n - 1, n - 1) if goal is None else goal
    S = n * n
    P = np.zeros((S, 4, S))
    moves = ((-1, 0), (0, 1), (1, 0), (0, -1))
    g = goal[0] * n + goal[1]
    for r in range(n):
        for c in range(n):
            s = r * n + c
            for a, (dr, dc) in enumerate(moves):
                if s == g:
                    P[s, a, s] = 1.0
                    continue
                rr, cc = r + dr, c + dc
                P[s, a, rr * n + cc if 0 <= rr < n and 0 <= cc < n else s] = 1.0
    reward = np.zeros((S, 4))
    reward[g] = 1.0
    return TabularMdp(P, reward, gamma, np.full(S, 1.0 / S))


def monte_carlo_occupancy(mdp, policy, n, horizon, rng):
    """Discounted visitation estimate from vectorised rollouts (independent of the package sampler)."""
    S, A = mdp.shape
    counts = np.zeros(S * A)
    s = rng.choice(S, size=n, p=mdp.initial_dist)
    cum_pi = np.cumsum(policy, axis=1)
    cum_P = np.cumsum(mdp.transition, axis=2)
    for t in range(horizon):
        a = np.minimum((rng.random(n)[:, None] > cum_pi[s]).sum(axis=1), A - 1)
        np.add.at(counts, s * A + a, (1 - mdp.gamma) * mdp.gamma ** t)
        s = np.minimum((rng.random(n)[:, None] > cum_P[s, a]).sum(axis=1), S - 1)
    return (counts / n).reshape(S, A)


@pytest.fixture
def small_mdp():
    return random_mdp(6, 3, 0.9, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def occupancy_lp(mdp, objective, constraint_reward=None, e_min=None):
    """Independent occupancy LP: max <objective, rho> over normalised Bellman-flow polytope.

    With ``constraint_reward`` the extra row <constraint_reward, rho> >= e_min is added.
    Returns (optimal value, rho).
    """
    from scipy.optimize import linprog

    S, A = mdp.shape
    # flow: sum_a rho(s,a) - gamma sum_{s',a} P(s|s',a) rho(s',a) = (1-gamma) mu(s)
    A_eq = np.zeros((S, S * A))
    for s in range(S):
        A_eq[s, s * A:(s + 1) * A] += 1.0
    A_eq -= mdp.gamma * mdp.transition.reshape(S * A, S).T
    b_eq = (1.0 - mdp.gamma) * mdp.initial_dist
    kwargs = {}
    if constraint_reward is not None:
        kwargs = {"A_ub": -np.asarray(constraint_reward, dtype=float).reshape(1, -1), "b_ub": [-e_min]}
    res = linprog(-np.asarray(objective, dtype=float).ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs", **kwargs)
    assert res.status == 0, res.message
    return -res.fun, res.x.reshape(S, A)


def tiny_instance(seed):
    """Random MDP with |S| <= 5, |A| <= 3 and an independent random anti-reward."""
    rng = np.random.default_rng(seed)
    S, A = int(rng.integers(2, 6)), int(rng.integers(2, 4))
    mdp = random_mdp(S, A, 0.9, seed=rng)
    r_minus = rng.uniform(-1.0, 1.0, size=(S, A))
    return mdp, r_minus


# acceptance criteria record their verdicts here; printed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
