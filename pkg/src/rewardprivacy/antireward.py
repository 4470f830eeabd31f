"""Anti-reward generation.

An anti-reward pays the agent for visiting what the optimal agent avoids.
Occupancy-based kinds alternate between fitting the reward that separates
the optimal occupancy from the current anti-occupancy, and re-planning on
that reward. The trajectory-KL kind is a one-shot ``-log pi*``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from .mdp import (TabularMdp, occupancy_of_policy, random_policy, solve_optimal,
                  solve_soft, uniform_policy)


class DivergenceKind(str, Enum):
    FORWARD_KL = "forward_kl"
    BACKWARD_KL = "backward_kl"
    JENSEN_SHANNON = "jensen_shannon"
    PEARSON_CHI2 = "pearson_chi2"
    SQUARED_HELLINGER = "squared_hellinger"
    TOTAL_VARIATION = "total_variation"
    WASSERSTEIN1 = "wasserstein1"


TRAJECTORY_KL = "trajectory_kl"
CLOSED_FORM_KINDS = tuple(k for k in DivergenceKind if k is not DivergenceKind.WASSERSTEIN1)
ALL_KINDS = tuple(k.value for k in DivergenceKind) + (TRAJECTORY_KL,)


def parse_kind(kind) -> DivergenceKind | str:
    if isinstance(kind, DivergenceKind):
        return kind
    if kind == TRAJECTORY_KL:
        return TRAJECTORY_KL
    try:
        return DivergenceKind(kind)
    except ValueError:
        raise ValueError(f"unknown anti-reward kind {kind!r}; expected one of {ALL_KINDS}") from None


@dataclass(frozen=True)
class AntiRewardConfig:
    kind: str = TRAJECTORY_KL
    iterations: int = 5
    smoothing_eps: float = 1e-8
    clip: tuple | None = None
    merl_temperature: float = 1.0
    seed: int = 0
    init: str = "uniform"  # "uniform" or "random" (seeded Dirichlet policy)
    w1_iters: int = 30
    w1_method: str = "lp"

    def __post_init__(self):
        object.__setattr__(self, "kind", parse_kind(self.kind))
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.smoothing_eps <= 0:
            raise ValueError("smoothing_eps must be positive")
        if self.merl_temperature <= 0:
            raise ValueError("merl_temperature must be positive")
        if self.init not in ("uniform", "random"):
            raise ValueError("init must be 'uniform' or 'random'")
        if self.clip is not None:
            lo, hi = self.clip
            if not lo < hi:
                raise ValueError("clip must be an increasing pair")
            object.__setattr__(self, "clip", (float(lo), float(hi)))

    @property
    def kind_name(self) -> str:
        return self.kind.value if isinstance(self.kind, DivergenceKind) else self.kind

    def header(self) -> dict:
        return {"kind": self.kind_name, "iterations": self.iterations, "seed": self.seed,
                "merl_temperature": self.merl_temperature}


# --------------------------------------------------------------------------
# closed forms


def f_div_closed_form(rho_star, rho_minus, kind, smoothing_eps: float = 1e-8) -> np.ndarray:
    """Pointwise maximiser of E_{rho-}[phi(u)] - E_{rho*}[u] for an f-divergence."""
    kind = parse_kind(kind)
    if kind == DivergenceKind.WASSERSTEIN1 or kind == TRAJECTORY_KL:
        raise ValueError(f"{kind} has no closed form")
    p_star = np.maximum(np.asarray(rho_star, dtype=float), smoothing_eps)
    p_minus = np.maximum(np.asarray(rho_minus, dtype=float), smoothing_eps)
    if p_star.shape != p_minus.shape:
        raise ValueError("occupancies have different shapes")
    ratio = p_minus / p_star
    if kind == DivergenceKind.FORWARD_KL:
        return ratio
    if kind == DivergenceKind.BACKWARD_KL:
        return -(1.0 + np.log(p_star / p_minus))
    if kind == DivergenceKind.JENSEN_SHANNON:
        return np.log(0.5 * (1.0 + ratio))
    if kind == DivergenceKind.PEARSON_CHI2:
        return 2.0 * (1.0 - p_star / p_minus)
    if kind == DivergenceKind.SQUARED_HELLINGER:
        return np.sqrt(ratio) - 1.0
    # Total variation: linear objective on a bounded domain, so the maximiser is
    # bang-bang; rho- heavier than rho* gets the top of the range.
    return 1.0 + np.sign(1.0 - p_star / p_minus)


def phi(kind, u):
    """The concave map phi(u) = -f*(-u) used in the variational objective."""
    kind = parse_kind(kind)
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if kind == DivergenceKind.FORWARD_KL:
            return np.where(u > 0, 1.0 + np.log(np.where(u > 0, u, 1.0)), -np.inf)
        if kind == DivergenceKind.BACKWARD_KL:
            return -np.exp(-(u + 1.0))
        if kind == DivergenceKind.JENSEN_SHANNON:
            inner = 2.0 - np.exp(-u)
            return np.where(inner > 0, np.log(np.where(inner > 0, inner, 1.0)), -np.inf)
        if kind == DivergenceKind.PEARSON_CHI2:
            return u - u * u / 4.0
        if kind == DivergenceKind.SQUARED_HELLINGER:
            return np.where(u > -1, u / (1.0 + u), -np.inf)
        if kind == DivergenceKind.TOTAL_VARIATION:
            return np.where((u >= 0) & (u <= 2), u, -np.inf)
    raise ValueError(f"{kind} has no variational phi")


def variational_objective(kind, u, rho_star, rho_minus) -> float:
    return float(np.sum(phi(kind, u) * rho_minus - np.asarray(u) * rho_star))


# --------------------------------------------------------------------------
# Wasserstein-1


def hop_distance(mdp: TabularMdp) -> np.ndarray:
    """Undirected shortest-path hop counts between states of the transition graph."""
    adj = (mdp.transition > 0).any(axis=1)
    adj = (adj | adj.T).astype(float)
    np.fill_diagonal(adj, 0.0)
    dist = shortest_path(adj, unweighted=True, directed=False)
    finite = np.isfinite(dist)
    if not finite.all():
        dist[~finite] = dist[finite].max() + 1.0
    return dist


def _matchings(pairs: np.ndarray) -> list[np.ndarray]:
    """Split edges into groups with no shared endpoint (greedy colouring)."""
    groups, used = [], []
    for k, (i, j) in enumerate(pairs):
        for g, nodes in enumerate(used):
            if i not in nodes and j not in nodes:
                groups[g].append(k)
                nodes.update((i, j))
                break
        else:
            groups.append([k])
            used.append({int(i), int(j)})
    return [np.array(g) for g in groups]


def _lipschitz_envelope(f: np.ndarray, dist: np.ndarray) -> np.ndarray:
    return np.min(f[None, :] + dist, axis=1)


def _project_lipschitz(h, pairs, bounds, groups, sweeps=400, tol=1e-12):
    """Euclidean projection onto {|f_i - f_j| <= d_ij} by Dykstra's algorithm."""
    f = h.copy()
    corrections = [np.zeros((len(g), 2)) for g in groups]
    for _ in range(sweeps):
        moved = 0.0
        for g, corr in zip(groups, corrections):
            i, j = pairs[g, 0], pairs[g, 1]
            xi = f[i] + corr[:, 0]
            xj = f[j] + corr[:, 1]
            diff = xi - xj
            excess = np.clip(diff, -bounds[g], bounds[g]) - diff
            yi = xi + excess / 2.0
            yj = xj - excess / 2.0
            corr[:, 0] = xi - yi
            corr[:, 1] = xj - yj
            moved = max(moved, float(np.max(np.abs(yi - f[i]), initial=0.0)),
                        float(np.max(np.abs(yj - f[j]), initial=0.0)))
            f[i] = yi
            f[j] = yj
        if moved < tol:
            break
    return f


def _solve_lp(g, pairs, bounds, n):
    m = len(pairs)
    rows = np.repeat(np.arange(2 * m), 2)
    cols = np.concatenate([pairs, pairs[:, ::-1]]).ravel()
    vals = np.tile([1.0, -1.0], 2 * m)
    A = coo_matrix((vals, (rows, cols)), shape=(2 * m, n)).tocsr()
    b = np.concatenate([bounds, bounds])
    box = [(None, None)] * n
    box[0] = (0.0, 0.0)  # the objective is shift invariant; pin one point
    res = linprog(-g, A_ub=A, b_ub=b, bounds=box, method="highs")
    if res.status != 0:
        raise RuntimeError(f"critic LP failed: {res.message}")
    return res.x


def _w1_points(g: np.ndarray, dist: np.ndarray, iters: int, method: str = "lp"):
    n = len(g)
    closure = shortest_path(dist, directed=False)
    # only pairs not implied by the triangle inequality need explicit constraints
    iu, ju = np.triu_indices(n, 1)
    direct = dist[iu, ju]
    keep = np.isfinite(direct) & (direct <= closure[iu, ju] + 1e-12)
    if n > 2:
        for k in np.nonzero(keep)[0]:
            i, j = iu[k], ju[k]
            via = closure[i] + closure[:, j]
            via[[i, j]] = np.inf
            if via.min() <= direct[k] + 1e-12:
                keep[k] = False
    pairs = np.stack([iu[keep], ju[keep]], axis=1)
    bounds = direct[keep]
    groups = _matchings(pairs)
    finite = closure[np.isfinite(closure)]
    diameter = float(finite.max()) if finite.size else 1.0
    norm = float(np.linalg.norm(g))
    f = np.zeros(n)
    best, best_val = f, 0.0
    if norm == 0.0 or len(pairs) == 0:
        return f, closure
    if method == "lp":
        f = _lipschitz_envelope(_solve_lp(g, pairs, bounds, n), closure)
        return f - f.mean(), closure
    step = 4.0 * max(diameter, 1.0) * np.sqrt(n) / norm
    for _ in range(iters):
        f = _project_lipschitz(f + step * g, pairs, bounds, groups)
        f -= f.mean()
        feasible = _lipschitz_envelope(f, closure)
        val = float(feasible @ g)
        if val > best_val + 1e-15:
            best, best_val = feasible, val
    best = best - best.mean()
    return best, closure


def wasserstein1_critic(mdp: TabularMdp, rho_star, rho_minus, ground_metric=None,
                        iters: int = 30, method: str = "lp", return_info: bool = False):
    """Lipschitz critic maximising E_{rho-}[f] - E_{rho*}[f].

    ``ground_metric`` is an (SA, SA) distance between state-action pairs; the
    default is the hop distance between states, with all actions of a state
    at distance zero, in which case the critic is solved over states.

    ``method="lp"`` solves the critic linear programme exactly; ``"ascent"``
    runs projected ascent with a Dykstra projection onto the Lipschitz set.
    Either way the result is passed through the Lipschitz envelope, so the
    constraints hold to rounding error.
    """
    if method not in ("lp", "ascent"):
        raise ValueError("method must be 'lp' or 'ascent'")
    S, A = mdp.shape
    rho_star = np.asarray(rho_star, dtype=float)
    rho_minus = np.asarray(rho_minus, dtype=float)
    if ground_metric is None:
        g = rho_minus.sum(axis=1) - rho_star.sum(axis=1)
        f, closure = _w1_points(g, hop_distance(mdp), iters, method)
        critic = np.repeat(f[:, None], A, axis=1)
        metric = np.kron(closure, np.ones((A, A)))
    else:
        D = np.asarray(ground_metric, dtype=float)
        if D.shape != (S * A, S * A):
            raise ValueError(f"ground_metric must have shape {(S * A, S * A)}")
        if np.any(D < 0) or not np.allclose(D, D.T):
            raise ValueError("ground_metric must be non-negative and symmetric")
        D = D.copy()
        np.fill_diagonal(D, 0.0)
        # zero off-diagonal distances are hard equality constraints; shortest_path
        # treats 0 as "no edge", so use a tiny positive weight instead
        D[(D == 0) & ~np.eye(S * A, dtype=bool)] = 1e-300
        g = (rho_minus - rho_star).ravel()
        f, closure = _w1_points(g, D, iters, method)
        critic = f.reshape(S, A)
        metric = closure
    flat = critic.ravel()
    violation = float(np.max(np.abs(flat[:, None] - flat[None, :]) - metric, initial=0.0))
    objective = float(np.sum(critic * (rho_minus - rho_star)))
    if return_info:
        return critic, {"objective": objective, "max_violation": max(violation, 0.0)}
    return critic


# --------------------------------------------------------------------------
# trajectory KL and the fixed-point loop


def traj_kl_anti_reward(mdp: TabularMdp, r=None, merl_temperature: float = 1.0) -> np.ndarray:
    """-log pi*, with pi* the soft-optimal policy for r / temperature."""
    if merl_temperature <= 0:
        raise ValueError("merl_temperature must be positive")
    r = mdp.reward if r is None else np.asarray(r, dtype=float)
    pi_star = solve_soft(mdp, r / merl_temperature)
    return -np.log(pi_star)


def overlap(rho_a, rho_b) -> float:
    return float(np.minimum(rho_a, rho_b).sum())


@dataclass
class AntiRewardDiagnostics:
    kind: str
    overlaps: list = field(default_factory=list)  # overlap at init, then after each iteration
    w1_violations: list = field(default_factory=list)

    def to_dict(self):
        return {"kind": self.kind, "overlaps": list(self.overlaps), "w1_violations": list(self.w1_violations)}


def gen_anti_reward(mdp: TabularMdp, r=None, config: AntiRewardConfig | None = None):
    """Generate an anti-reward; returns ``(reward_table, diagnostics)``."""
    config = config or AntiRewardConfig()
    r = mdp.reward if r is None else np.asarray(r, dtype=float)
    diag = AntiRewardDiagnostics(config.kind_name)
    if config.kind == TRAJECTORY_KL:
        r_minus = traj_kl_anti_reward(mdp, r, config.merl_temperature)
        return _clip(r_minus, config.clip), diag

    rho_star = occupancy_of_policy(mdp, solve_soft(mdp, r / config.merl_temperature))
    S, A = mdp.shape
    if config.init == "random":
        init_policy = random_policy(S, A, np.random.default_rng(config.seed))
    else:
        init_policy = uniform_policy(S, A)
    rho_minus = occupancy_of_policy(mdp, init_policy)
    diag.overlaps.append(overlap(rho_star, rho_minus))
    r_minus = None
    for _ in range(config.iterations):
        if config.kind == DivergenceKind.WASSERSTEIN1:
            r_minus, info = wasserstein1_critic(mdp, rho_star, rho_minus, iters=config.w1_iters,
                                                method=config.w1_method, return_info=True)
            diag.w1_violations.append(info["max_violation"])
        else:
            r_minus = f_div_closed_form(rho_star, rho_minus, config.kind, config.smoothing_eps)
        r_minus = _clip(r_minus, config.clip)
        policy, _ = solve_optimal(mdp, r_minus)
        rho_minus = occupancy_of_policy(mdp, policy)
        diag.overlaps.append(overlap(rho_star, rho_minus))
    return r_minus, diag


def _clip(reward, clip):
    if clip is None:
        return reward
    return np.clip(reward, clip[0], clip[1])
