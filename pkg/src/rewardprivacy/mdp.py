"""Finite MDPs, occupancy measures, planners and trajectory sampling.

Occupancy measures are normalised: they carry the (1 - gamma) factor, so every
valid occupancy sums to one and ``expected_return`` is (1 - gamma) times the
discounted return. Rewards, policies and occupancies are plain ``(S, A)``
float arrays; only the MDP, mixtures and trajectories get their own types.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import DimensionMismatch, EmptyDemonstrations

# Type aliases; all are float arrays indexed (state, action).
RewardTable = np.ndarray
StochasticPolicy = np.ndarray
OccupancyMeasure = np.ndarray

STOCHASTIC_ATOL = 1e-9
TIE_RTOL = 1e-11


def _frozen(x, dtype=float):
    arr = np.array(x, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TabularMdp:
    """Dense finite MDP ``(S, A, P, r, gamma, mu)``.

    ``transition[s, a, s']`` is P(s' | s, a). Arrays are copied and made
    read-only, so instances can be shared freely.
    """

    transition: np.ndarray
    reward: np.ndarray
    gamma: float
    initial_dist: np.ndarray
    _flat_transition: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        P = _frozen(self.transition)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise DimensionMismatch(f"transition must have shape (S, A, S), got {P.shape}")
        S, A, _ = P.shape
        r = _frozen(self.reward)
        if r.shape != (S, A):
            raise DimensionMismatch(f"reward must have shape {(S, A)}, got {r.shape}")
        mu = _frozen(self.initial_dist)
        if mu.shape != (S,):
            raise DimensionMismatch(f"initial_dist must have shape {(S,)}, got {mu.shape}")
        gamma = float(self.gamma)
        if not 0.0 <= gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {gamma}")
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "reward", r)
        object.__setattr__(self, "initial_dist", mu)
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "_flat_transition", P.reshape(S * A, S))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.transition.shape[:2]

    def with_reward(self, reward) -> "TabularMdp":
        return TabularMdp(self.transition, reward, self.gamma, self.initial_dist)

    def next_expectation(self, values: np.ndarray) -> np.ndarray:
        """E[values(s') | s, a] as an (S, A) array."""
        return (self._flat_transition @ values).reshape(self.shape)


@dataclass(frozen=True, eq=False)
class MixedPolicy:
    """A distribution over stationary policies, sampled once per episode."""

    members: tuple
    weights: np.ndarray

    def __post_init__(self):
        members = tuple(_frozen(m) for m in self.members)
        if not members:
            raise ValueError("a mixed policy needs at least one member")
        if any(m.shape != members[0].shape for m in members):
            raise DimensionMismatch("mixture members have different shapes")
        w = _frozen(self.weights)
        if w.shape != (len(members),):
            raise DimensionMismatch("one weight per member is required")
        if np.any(w < 0) or abs(w.sum() - 1.0) > STOCHASTIC_ATOL:
            raise ValueError("mixture weights must be a probability vector")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "weights", w)

    @property
    def shape(self):
        return self.members[0].shape


Policy = Union[np.ndarray, MixedPolicy]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """One sampled episode, stored column-wise."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    horizon: int
    n_states: int
    n_actions: int

    def __len__(self):
        return len(self.states)

    @property
    def steps(self) -> list[tuple[int, int, float]]:
        return [(int(s), int(a), float(r)) for s, a, r in zip(self.states, self.actions, self.rewards)]


# --------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class Violation:
    kind: str
    location: tuple
    detail: str = ""

    def __str__(self):
        loc = ",".join(str(x) for x in self.location)
        return f"{self.kind}({loc})" + (f": {self.detail}" if self.detail else "")


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def kinds(self) -> list[str]:
        return [v.kind for v in self.violations]


def reachable_states(mdp: TabularMdp) -> np.ndarray:
    """Boolean mask of states reachable from the support of mu under some policy."""
    adjacency = (mdp.transition > 0).any(axis=1)
    seen = mdp.initial_dist > 0
    frontier = seen.copy()
    while frontier.any():
        nxt = adjacency[frontier].any(axis=0) & ~seen
        seen |= nxt
        frontier = nxt
    return seen


def validate_mdp(mdp: TabularMdp) -> ValidationReport:
    violations = []
    P = mdp.transition
    for s, a in zip(*np.nonzero((P < 0).any(axis=2))):
        violations.append(Violation("NegativeTransition", (int(s), int(a))))
    sums = P.sum(axis=2)
    for s, a in zip(*np.nonzero(np.abs(sums - 1.0) > STOCHASTIC_ATOL)):
        violations.append(Violation("NonStochasticRow", (int(s), int(a)), f"sum={sums[s, a]:.12g}"))
    mu = mdp.initial_dist
    if np.any(mu < 0) or abs(mu.sum() - 1.0) > STOCHASTIC_ATOL:
        violations.append(Violation("InvalidInitialDist", (), f"sum={mu.sum():.12g}"))
    for s in np.nonzero(~np.isfinite(mdp.reward).all(axis=1))[0]:
        violations.append(Violation("NonFiniteReward", (int(s),)))
    for s in np.nonzero(~reachable_states(mdp))[0]:
        violations.append(Violation("UnreachableState", (int(s),)))
    return ValidationReport(tuple(violations))


def check_policy(policy: np.ndarray, mdp: TabularMdp | None = None) -> np.ndarray:
    policy = np.asarray(policy, dtype=float)
    if mdp is not None and policy.shape != mdp.shape:
        raise DimensionMismatch(f"policy shape {policy.shape} does not match MDP {mdp.shape}")
    if np.any(policy < 0) or np.any(np.abs(policy.sum(axis=1) - 1.0) > STOCHASTIC_ATOL):
        raise ValueError("policy rows must be probability vectors")
    return policy


def flow_residual(mdp: TabularMdp, rho: np.ndarray) -> np.ndarray:
    """Per-state violation of the normalised Bellman flow constraints."""
    inflow = mdp.gamma * np.einsum("sat,sa->t", mdp.transition, rho)
    return rho.sum(axis=1) - (1.0 - mdp.gamma) * mdp.initial_dist - inflow


# --------------------------------------------------------------------------
# occupancy algebra


def uniform_policy(n_states: int, n_actions: int) -> np.ndarray:
    return np.full((n_states, n_actions), 1.0 / n_actions)


def random_policy(n_states: int, n_actions: int, rng: np.random.Generator) -> np.ndarray:
    return rng.dirichlet(np.ones(n_actions), size=n_states)


def policy_transition(mdp: TabularMdp, policy: np.ndarray) -> np.ndarray:
    return np.einsum("sa,sat->st", policy, mdp.transition)


def state_visitation(mdp: TabularMdp, policy: np.ndarray) -> np.ndarray:
    """Normalised discounted state visitation d = (1-g) mu + g P_pi^T d."""
    S = mdp.n_states
    P_pi = policy_transition(mdp, policy)
    lhs = np.eye(S) - mdp.gamma * P_pi.T
    return np.linalg.solve(lhs, (1.0 - mdp.gamma) * mdp.initial_dist)


def occupancy_of_policy(mdp: TabularMdp, policy: Policy) -> np.ndarray:
    if isinstance(policy, MixedPolicy):
        return sum(w * occupancy_of_policy(mdp, m) for w, m in zip(policy.weights, policy.members))
    policy = check_policy(policy, mdp)
    d = state_visitation(mdp, policy)
    # the solve can leave -1e-17 style noise on unreachable states
    return np.clip(d, 0.0, None)[:, None] * policy


def policy_of_occupancy(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    mass = rho.sum(axis=1, keepdims=True)
    uniform = np.full_like(rho, 1.0 / rho.shape[1])
    with np.errstate(invalid="ignore", divide="ignore"):
        policy = np.where(mass > 0, rho / np.where(mass > 0, mass, 1.0), uniform)
    return policy


def expected_return(rho: np.ndarray, reward: np.ndarray) -> float:
    rho = np.asarray(rho, dtype=float)
    reward = np.asarray(reward, dtype=float)
    if rho.shape != reward.shape:
        raise DimensionMismatch(f"occupancy {rho.shape} vs reward {reward.shape}")
    return float(np.sum(rho * reward))


def causal_entropy(rho: np.ndarray) -> float:
    rho = np.asarray(rho, dtype=float)
    policy = policy_of_occupancy(rho)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(rho > 0, rho * np.log(np.where(policy > 0, policy, 1.0)), 0.0)
    return float(max(-terms.sum(), 0.0))


def policy_return(mdp: TabularMdp, policy: Policy, reward: np.ndarray | None = None) -> float:
    reward = mdp.reward if reward is None else reward
    return expected_return(occupancy_of_policy(mdp, policy), reward)


# --------------------------------------------------------------------------
# planning


def greedy_actions(q: np.ndarray) -> np.ndarray:
    """Per-state argmax; near-ties go to the lowest action index."""
    q = np.asarray(q, dtype=float)
    tol = TIE_RTOL * (1.0 + np.max(np.abs(q)))
    best = q.max(axis=1, keepdims=True)
    return np.argmax(q >= best - tol, axis=1)


def deterministic_policy(actions: np.ndarray, n_actions: int) -> np.ndarray:
    policy = np.zeros((len(actions), n_actions))
    policy[np.arange(len(actions)), actions] = 1.0
    return policy


def _evaluate_actions(mdp: TabularMdp, reward: np.ndarray, actions: np.ndarray) -> np.ndarray:
    idx = np.arange(mdp.n_states)
    P_pi = mdp.transition[idx, actions]
    return np.linalg.solve(np.eye(mdp.n_states) - mdp.gamma * P_pi, reward[idx, actions])


def optimal_q(mdp: TabularMdp, reward: np.ndarray | None = None, tol: float = 1e-6,
              init_values: np.ndarray | None = None, max_iter: int = 100_000) -> np.ndarray:
    """Optimal (unnormalised) Q table.

    Value iteration runs to a sup-norm residual of ``tol`` (relative to the
    reward scale); the greedy policy is then polished with exact policy
    iteration, so the result is exact whatever ``tol`` and ties are resolved
    on exact values.
    """
    reward = mdp.reward if reward is None else np.asarray(reward, dtype=float)
    scale = max(1.0, float(np.max(np.abs(reward))))
    V = np.zeros(mdp.n_states) if init_values is None else np.array(init_values, dtype=float)
    for _ in range(max_iter):
        Q = reward + mdp.gamma * mdp.next_expectation(V)
        V_new = Q.max(axis=1)
        done = np.max(np.abs(V_new - V)) <= tol * scale
        V = V_new
        if done:
            break
    actions = greedy_actions(reward + mdp.gamma * mdp.next_expectation(V))
    for _ in range(1000):
        V = _evaluate_actions(mdp, reward, actions)
        Q = reward + mdp.gamma * mdp.next_expectation(V)
        improved = greedy_actions(Q)
        # only switch where the improvement is real, otherwise PI can cycle on ties
        gain = Q[np.arange(mdp.n_states), improved] - Q[np.arange(mdp.n_states), actions]
        switch = gain > TIE_RTOL * (1.0 + np.max(np.abs(Q)))
        if not switch.any():
            break
        actions = np.where(switch, improved, actions)
    return Q


def solve_optimal(mdp: TabularMdp, reward: np.ndarray | None = None, tol: float = 1e-6,
                  init_values: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic optimal policy (lowest-index tie-break) and its Q table."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    Q = optimal_q(mdp, reward, tol, init_values)
    return deterministic_policy(greedy_actions(Q), mdp.n_actions), Q


def logsumexp_rows(q: np.ndarray) -> np.ndarray:
    top = q.max(axis=1)
    return top + np.log(np.exp(q - top[:, None]).sum(axis=1))


def soft_values(mdp: TabularMdp, reward: np.ndarray | None = None, tol: float = 1e-10,
                max_iter: int = 1_000_000, init_values: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Soft value iteration: Q = r + g E[V'], V = logsumexp_a Q."""
    reward = mdp.reward if reward is None else np.asarray(reward, dtype=float)
    scale = max(1.0, float(np.max(np.abs(reward))))
    V = np.zeros(mdp.n_states) if init_values is None else np.array(init_values, dtype=float)
    for _ in range(max_iter):
        Q = reward + mdp.gamma * mdp.next_expectation(V)
        V_new = logsumexp_rows(Q)
        done = np.max(np.abs(V_new - V)) <= tol * scale
        V = V_new
        if done:
            break
    Q = reward + mdp.gamma * mdp.next_expectation(V)
    return Q, logsumexp_rows(Q)


def soft_policy(q: np.ndarray) -> np.ndarray:
    z = q - q.max(axis=1, keepdims=True)
    p = np.exp(z)
    return p / p.sum(axis=1, keepdims=True)


def solve_soft(mdp: TabularMdp, reward: np.ndarray | None = None, tol: float = 1e-10) -> np.ndarray:
    """Maximum-entropy optimal policy for ``reward``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    Q, _ = soft_values(mdp, reward, tol)
    return soft_policy(Q)


# --------------------------------------------------------------------------
# sampling


def horizon_for(gamma: float, floor: float = 1e-6) -> int:
    """Smallest h with gamma**h below ``floor``."""
    if gamma <= 0:
        return 1
    return max(1, int(np.floor(np.log(floor) / np.log(gamma))) + 1)


def _categorical(probs: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(probs, axis=1)
    idx = (u[:, None] > cdf).sum(axis=1)
    return np.minimum(idx, probs.shape[1] - 1)


def sample_trajectories(mdp: TabularMdp, policy: Policy, n: int, horizon: int,
                        seed: int | np.random.Generator) -> list[Trajectory]:
    """Roll out ``n`` episodes of fixed length ``horizon``.

    For a mixed policy one member is drawn per episode and followed throughout.
    """
    if n < 1 or horizon < 1:
        raise ValueError("n and horizon must be at least 1")
    rng = np.random.default_rng(seed)
    if isinstance(policy, MixedPolicy):
        tables = np.stack(policy.members)
        member = rng.choice(len(tables), size=n, p=policy.weights)
    else:
        tables = check_policy(policy, mdp)[None]
        member = np.zeros(n, dtype=int)
    if tables.shape[1:] != mdp.shape:
        raise DimensionMismatch("policy does not match the MDP")
    states = np.empty((n, horizon), dtype=np.int64)
    actions = np.empty((n, horizon), dtype=np.int64)
    s = rng.choice(mdp.n_states, size=n, p=mdp.initial_dist)
    for t in range(horizon):
        a = _categorical(tables[member, s], rng.random(n))
        states[:, t] = s
        actions[:, t] = a
        s = _categorical(mdp.transition[s, a], rng.random(n))
    rewards = mdp.reward[states, actions]
    S, A = mdp.shape
    return [Trajectory(states[i], actions[i], rewards[i], horizon, S, A) for i in range(n)]


def empirical_occupancy(trajectories: Sequence[Trajectory], gamma: float) -> np.ndarray:
    """Discount-weighted visitation counts, renormalised to unit mass."""
    if len(trajectories) == 0:
        raise EmptyDemonstrations("no trajectories given")
    S, A = trajectories[0].n_states, trajectories[0].n_actions
    flat, weights = [], []
    for tr in trajectories:
        flat.append(tr.states * A + tr.actions)
        weights.append(gamma ** np.arange(len(tr)))
    counts = np.bincount(np.concatenate(flat), weights=np.concatenate(weights), minlength=S * A)
    total = counts.sum()
    if total <= 0:
        raise EmptyDemonstrations("trajectories contain no steps")
    return (counts / total).reshape(S, A)


def mix_policies(members: Sequence[np.ndarray], weights, mdp: TabularMdp) -> tuple[MixedPolicy, np.ndarray]:
    mixed = MixedPolicy(tuple(members), np.asarray(weights, dtype=float))
    if mixed.shape != mdp.shape:
        raise DimensionMismatch("mixture members do not match the MDP")
    return mixed, occupancy_of_policy(mdp, mixed)


# --------------------------------------------------------------------------
# generic random instances


def random_mdp(n_states: int, n_actions: int, gamma: float, seed, reward_range=(-1.0, 1.0),
               sparsity: float = 0.0) -> TabularMdp:
    """Random dense MDP with Dirichlet rows, used by tests and oracles.

    ``sparsity`` zeroes that fraction of each row (keeping at least one
    entry) before renormalising.
    """
    rng = np.random.default_rng(seed)
    P = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    if sparsity > 0:
        mask = rng.random(P.shape) >= sparsity
        mask[..., 0] |= ~mask.any(axis=2)
        P = P * mask
        P /= P.sum(axis=2, keepdims=True)
    reward = rng.uniform(*reward_range, size=(n_states, n_actions))
    mu = rng.dirichlet(np.ones(n_states))
    return TabularMdp(P, reward, gamma, mu)
