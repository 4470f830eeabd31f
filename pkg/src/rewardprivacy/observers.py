"""Reward-recovering observers.

``mce_irl`` fits a reward whose soft-optimal occupancy matches a target
occupancy. The clustered variants first split the target into connected
high-visitation regions and fit only one of them, on the assumption that a
deceptive agent spreads mass over decoy regions.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateSupport, DimensionMismatch, EmptyDemonstrations
from .mdp import TabularMdp, empirical_occupancy, occupancy_of_policy, soft_policy, soft_values


@dataclass(frozen=True)
class IrlConfig:
    learning_rate: float = 0.1
    lr_decay: float = 0.999
    max_iters: int = 5000
    grad_tol: float = 1e-3
    init: str = "zero"  # "zero" or "uniform" (seeded U[-1, 1])
    seed: int = 0
    reward_type: str = "state"  # "state" or "state_action"
    optimizer: str = "lbfgs"  # "lbfgs" or "gradient"
    patience: int = 200  # lbfgs stops after this many evaluations without a better gap

    def __post_init__(self):
        if self.learning_rate <= 0 or not 0 < self.lr_decay <= 1:
            raise ValueError("learning_rate must be positive and lr_decay in (0, 1]")
        if self.max_iters < 1 or self.grad_tol <= 0 or self.patience < 1:
            raise ValueError("max_iters and patience must be >= 1 and grad_tol positive")
        if self.init not in ("zero", "uniform"):
            raise ValueError("init must be 'zero' or 'uniform'")
        if self.reward_type not in ("state", "state_action"):
            raise ValueError("reward_type must be 'state' or 'state_action'")
        if self.optimizer not in ("lbfgs", "gradient"):
            raise ValueError("optimizer must be 'lbfgs' or 'gradient'")


@dataclass
class RecoveredReward:
    reward: np.ndarray
    final_occupancy_gap: float  # L1 distance between fitted and target occupancy
    iterations_used: int
    converged: bool
    info: dict = field(default_factory=dict)


def soft_occupancy(mdp: TabularMdp, reward) -> np.ndarray:
    q, _ = soft_values(mdp, reward)
    return occupancy_of_policy(mdp, soft_policy(q))


def irl_surrogate(mdp: TabularMdp, target, reward, init_values=None, return_values=False):
    """Concave MCE-IRL dual: <target, r> - (1-gamma) mu.V_soft(r), and its gradient in r."""
    reward = np.asarray(reward, dtype=float)
    q, v = soft_values(mdp, reward, init_values=init_values)
    rho = occupancy_of_policy(mdp, soft_policy(q))
    value = float(np.sum(target * reward) - (1.0 - mdp.gamma) * mdp.initial_dist @ v)
    if return_values:
        return value, target - rho, v
    return value, target - rho


def _check_target(mdp, target):
    target = np.asarray(target, dtype=float)
    if target.shape != mdp.shape:
        raise DimensionMismatch(f"target occupancy has shape {target.shape}, expected {mdp.shape}")
    total = target.sum()
    if total <= 0:
        raise EmptyDemonstrations("target occupancy has no mass")
    return target / total


class _Stop(Exception):
    pass


def mce_irl(dynamics: TabularMdp, target_rho, config: IrlConfig | None = None) -> RecoveredReward:
    """Maximum causal entropy IRL against a target occupancy measure.

    Stops once the L1 occupancy gap falls to ``grad_tol``. A gap above the
    tolerance after ``max_iters`` is reported, not raised.
    """
    config = config or IrlConfig()
    target = _check_target(dynamics, target_rho)
    S, A = dynamics.shape
    state_only = config.reward_type == "state"
    n_params = S if state_only else S * A
    if config.init == "uniform":
        theta0 = np.random.default_rng(config.seed).uniform(-1.0, 1.0, size=n_params)
    else:
        theta0 = np.zeros(n_params)

    def expand(theta):
        return np.repeat(theta[:, None], A, axis=1) if state_only else theta.reshape(S, A)

    def reduce(grad):
        return grad.sum(axis=1) if state_only else grad.ravel()

    best = {"gap": np.inf, "theta": theta0, "evals": 0, "values": None, "found_at": 0}

    def evaluate(theta):
        value, grad, best["values"] = irl_surrogate(dynamics, target, expand(theta), best["values"], True)
        gap = float(np.abs(grad).sum())
        best["evals"] += 1
        if gap < best["gap"] * (1.0 - 1e-6):
            best["found_at"] = best["evals"]
        if gap < best["gap"]:
            best["gap"], best["theta"] = gap, theta.copy()
        return value, grad, gap

    if config.optimizer == "gradient":
        theta = theta0.copy()
        lr = config.learning_rate
        iterations = 0
        for iterations in range(1, config.max_iters + 1):
            _, grad, gap = evaluate(theta)
            if gap <= config.grad_tol:
                break
            theta = theta + lr * reduce(grad)
            lr *= config.lr_decay
    else:
        def objective(theta):
            value, grad, gap = evaluate(theta)
            # unreachable targets (zero mass on visited-able states) have no finite optimum
            if gap <= config.grad_tol or best["evals"] - best["found_at"] > config.patience:
                raise _Stop
            return -value, -reduce(grad)

        try:
            minimize(objective, theta0, jac=True, method="L-BFGS-B",
                     options={"maxiter": config.max_iters, "maxfun": 2 * config.max_iters,
                              "gtol": 1e-10, "ftol": 1e-12, "maxcor": 20})
        except _Stop:
            pass
        iterations = best["evals"]
    reward = expand(best["theta"])
    # centre the reward; soft-optimal behaviour ignores constant shifts
    reward = reward - reward.mean()
    gap = best["gap"]
    return RecoveredReward(reward, gap, iterations, gap <= config.grad_tol)


def irl_from_demos(dynamics: TabularMdp, trajectories, gamma: float | None = None,
                   config: IrlConfig | None = None) -> RecoveredReward:
    gamma = dynamics.gamma if gamma is None else gamma
    if not np.isclose(gamma, dynamics.gamma):
        raise ValueError("gamma differs from the dynamics' discount")
    return mce_irl(dynamics, empirical_occupancy(trajectories, gamma), config)


# --------------------------------------------------------------------------
# clustered observers


@dataclass
class OccupancyClusters:
    clusters: tuple  # arrays of state indices, ordered by smallest member
    masses: np.ndarray  # state-visitation mass of each cluster


def cluster_occupancy(mdp: TabularMdp, rho, mass_threshold: float = 0.05) -> OccupancyClusters:
    """Connected components of the states holding at least ``mass_threshold`` of the peak mass."""
    if not 0.0 <= mass_threshold < 1.0:
        raise ValueError("mass_threshold must lie in [0, 1)")
    rho = _check_target(mdp, rho)
    d = rho.sum(axis=1)
    kept = np.nonzero(d > mass_threshold * d.max())[0]
    if kept.size == 0:
        raise DegenerateSupport("no state passes the mass threshold")
    adj = (mdp.transition > 0).any(axis=1)[np.ix_(kept, kept)]
    n, labels = connected_components(adj, directed=True, connection="weak")
    clusters = tuple(kept[labels == k] for k in range(n))
    clusters = tuple(sorted(clusters, key=lambda c: int(c.min())))
    masses = np.array([d[c].sum() for c in clusters])
    return OccupancyClusters(clusters, masses)


def restrict_to_states(rho, states) -> np.ndarray:
    """Occupancy zeroed outside ``states`` and rescaled to unit mass."""
    rho = np.asarray(rho, dtype=float)
    out = np.zeros_like(rho)
    out[states] = rho[states]
    total = out.sum()
    if total <= 0:
        raise DegenerateSupport("selected states carry no occupancy")
    return out / total


def irl_clustered(mdp: TabularMdp, rho, config: IrlConfig | None = None, mode: str = "max",
                  seed: int = 0, mass_threshold: float = 0.05) -> RecoveredReward:
    """IRL on one cluster of the target: the heaviest (``max``) or a seeded random one."""
    if mode not in ("max", "random"):
        raise ValueError("mode must be 'max' or 'random'")
    found = cluster_occupancy(mdp, rho, mass_threshold)
    if mode == "max":
        pick = int(np.argmax(found.masses))
    else:
        pick = int(np.random.default_rng(seed).integers(len(found.clusters)))
    states = found.clusters[pick]
    result = mce_irl(mdp, restrict_to_states(rho, states), config)
    result.info.update({"mode": mode, "cluster": states.tolist(), "n_clusters": len(found.clusters)})
    return result
