"""Reward-quality measures: Pearson, EPIC, rollout return and ordering consistency."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateVariance, DimensionMismatch
from .mdp import TabularMdp, expected_return, occupancy_of_policy, random_policy, solve_optimal

TIE_ATOL = 1e-9


def _standardise(x: np.ndarray, what: str) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    centred = x - x.mean()
    norm = np.linalg.norm(centred)
    # relative test: a table that is constant up to rounding has no direction
    if norm <= 1e-12 * max(1.0, float(np.max(np.abs(x)))) * np.sqrt(x.size):
        raise DegenerateVariance(f"{what} is constant")
    return centred / norm


def pearson(r1, r2) -> float:
    r1, r2 = np.asarray(r1, dtype=float), np.asarray(r2, dtype=float)
    if r1.shape != r2.shape:
        raise DimensionMismatch(f"reward shapes differ: {r1.shape} vs {r2.shape}")
    z1 = _standardise(r1, "first reward")
    z2 = _standardise(r2, "second reward")
    return float(np.clip(z1 @ z2, -1.0, 1.0))


def _lift(r, n_states, n_actions) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape == (n_states, n_actions):
        return np.broadcast_to(r[:, :, None], (n_states, n_actions, n_states))
    if r.shape == (n_states, n_actions, n_states):
        return r
    raise DimensionMismatch(f"reward shape {r.shape} fits neither (S, A) nor (S, A, S)")


def canonicalize(r, n_states: int, n_actions: int, gamma: float,
                 state_dist=None, action_dist=None) -> np.ndarray:
    """C(R)(s,a,s') = R(s,a,s') + E[gamma R(s',A,S') - R(s,A,S') - gamma R(S,A,S')]."""
    R = _lift(r, n_states, n_actions)
    ps = np.full(n_states, 1.0 / n_states) if state_dist is None else np.asarray(state_dist, dtype=float)
    pa = np.full(n_actions, 1.0 / n_actions) if action_dist is None else np.asarray(action_dist, dtype=float)
    # m(x) = E_{A, S'} R(x, A, S')
    m = np.einsum("xay,a,y->x", R, pa, ps)
    mean = float(ps @ m)
    return R + gamma * m[None, None, :] - m[:, None, None] - gamma * mean


def epic(r1, r2, n_states: int, n_actions: int, gamma: float, state_dist=None, action_dist=None) -> float:
    c1 = canonicalize(r1, n_states, n_actions, gamma, state_dist, action_dist)
    c2 = canonicalize(r2, n_states, n_actions, gamma, state_dist, action_dist)
    z1 = _standardise(c1, "first canonical reward")
    z2 = _standardise(c2, "second canonical reward")
    # sqrt((1 - corr)/2) written as a distance between unit vectors, which is
    # exactly symmetric and does not lose precision near zero
    return float(np.clip(np.linalg.norm(z1 - z2) / 2.0, 0.0, 1.0))


def rollout_eval(mdp: TabularMdp, r_true, r_tilde) -> tuple[float, float]:
    """Return under ``r_true`` of the optimal policy for ``r_tilde``, and its ratio to E*."""
    r_true = np.asarray(r_true, dtype=float)
    r_tilde = np.asarray(r_tilde, dtype=float)
    if r_true.shape != mdp.shape or r_tilde.shape != mdp.shape:
        raise DimensionMismatch("rewards must match the MDP shape")
    pi_tilde, _ = solve_optimal(mdp, r_tilde)
    pi_star, _ = solve_optimal(mdp, r_true)
    rollout = expected_return(occupancy_of_policy(mdp, pi_tilde), r_true)
    e_star = expected_return(occupancy_of_policy(mdp, pi_star), r_true)
    ratio = rollout / e_star if e_star != 0 else float("nan")
    return rollout, ratio


def ordering_consistency(mdp: TabularMdp, r_true, r_tilde, n_pairs: int = 2000, seed: int = 0) -> float:
    """Fraction of random policy pairs ranked the same way by both rewards."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    rng = np.random.default_rng(seed)
    S, A = mdp.shape
    agree = 0
    for _ in range(n_pairs):
        rho_a = occupancy_of_policy(mdp, random_policy(S, A, rng))
        rho_b = occupancy_of_policy(mdp, random_policy(S, A, rng))
        diff = rho_a - rho_b
        d_true = float(np.sum(diff * r_true))
        d_tilde = float(np.sum(diff * r_tilde))
        tied = abs(d_true) <= TIE_ATOL or abs(d_tilde) <= TIE_ATOL
        if tied or d_true * d_tilde > 0:
            agree += 1
    return agree / n_pairs


@dataclass
class MetricsReport:
    pearson: float | None
    epic: float | None
    rollout_return: float
    rollout_ratio: float
    ordering_consistency: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate_rewards(mdp: TabularMdp, r_true, r_tilde, n_pairs: int = 2000, seed: int = 0) -> MetricsReport:
    """All metrics at once; a constant recovered reward yields ``None`` correlations."""
    try:
        p = pearson(r_true, r_tilde)
    except DegenerateVariance:
        p = None
    try:
        e = epic(r_true, r_tilde, mdp.n_states, mdp.n_actions, mdp.gamma)
    except DegenerateVariance:
        e = None
    rollout, ratio = rollout_eval(mdp, r_true, r_tilde)
    order = ordering_consistency(mdp, r_true, r_tilde, n_pairs, seed) if n_pairs > 0 else None
    return MetricsReport(p, e, rollout, ratio, order)
