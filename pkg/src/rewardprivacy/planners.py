"""Reward-constrained planners.

Each planner keeps the expected return at or above a floor ``e_min`` while
making the behaviour uninformative about the reward: MEIR maximises causal
entropy, MM maximises an anti-reward by Lagrangian search over the reward
weight, MMBE softens the MM policy, and MM^mix mixes MM policies for several
anti-rewards.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import InfeasibleThreshold, LambdaCapTooSmall
from .mdp import (MixedPolicy, Policy, TabularMdp, causal_entropy, expected_return, occupancy_of_policy,
                  optimal_q, soft_policy, solve_optimal, solve_soft, uniform_policy)

FEASIBILITY_ATOL = 1e-9


@dataclass(frozen=True)
class RewardConstraint:
    """Either an absolute floor ``e_min`` or a fraction of the feasible range."""

    e_min: float | None = None
    frac: float | None = None

    def __post_init__(self):
        if (self.e_min is None) == (self.frac is None):
            raise ValueError("give exactly one of e_min and frac")
        if self.frac is not None and not 0.0 <= self.frac <= 1.0:
            raise ValueError("frac must lie in [0, 1]")

    def resolve(self, low: float, high: float) -> float:
        if self.frac is not None:
            return float(low + self.frac * (high - low))
        return float(self.e_min)


def _as_constraint(constraint) -> RewardConstraint:
    if isinstance(constraint, RewardConstraint):
        return constraint
    return RewardConstraint(e_min=float(constraint))


@dataclass
class ReferenceReturns:
    e_star: float  # optimal return
    e_hat: float  # uniform-policy return
    e_minus: float | None = None  # return of the anti-reward-optimal policy


def reference_returns(mdp: TabularMdp, r=None, r_minus=None) -> ReferenceReturns:
    r = mdp.reward if r is None else np.asarray(r, dtype=float)
    pi_star, _ = solve_optimal(mdp, r)
    e_star = expected_return(occupancy_of_policy(mdp, pi_star), r)
    e_hat = expected_return(occupancy_of_policy(mdp, uniform_policy(*mdp.shape)), r)
    e_minus = None
    if r_minus is not None:
        pi_minus, _ = solve_optimal(mdp, r_minus)
        e_minus = expected_return(occupancy_of_policy(mdp, pi_minus), r)
    return ReferenceReturns(e_star, e_hat, e_minus)


@dataclass
class PlannerResult:
    planner: str
    policy: Policy
    occupancy: np.ndarray
    e_min: float
    lambda_star: float | None
    achieved_return: float
    achieved_objective: float  # causal entropy for MEIR, anti-return otherwise
    iterations: int
    converged: bool
    q_table: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    @property
    def constraint_deviation(self) -> float:
        return self.achieved_return - self.e_min

    def header(self) -> dict:
        return {
            "planner": self.planner,
            "e_min": self.e_min,
            "lambda_star": self.lambda_star,
            "achieved_return": self.achieved_return,
            "achieved_objective": self.achieved_objective,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def _check_range(e_min, low, high, what):
    if not (low - FEASIBILITY_ATOL <= e_min <= high + FEASIBILITY_ATOL):
        raise InfeasibleThreshold(f"e_min={e_min:.10g} outside [{low:.10g}, {high:.10g}] ({what})")


# --------------------------------------------------------------------------
# MEIR


def meir(mdp: TabularMdp, r=None, constraint=None, return_tol: float = 1e-6,
         lambda_max: float | None = None, max_iter: int = 200) -> PlannerResult:
    """Maximum-entropy policy with return at least ``e_min``.

    The solution is the soft-optimal policy for ``lambda * r``; lambda is
    found by bisection on the (increasing) return. The bracket end that
    satisfies the constraint is returned.
    """
    r = mdp.reward if r is None else np.asarray(r, dtype=float)
    refs = reference_returns(mdp, r)
    cons = _as_constraint(constraint if constraint is not None else RewardConstraint(frac=0.5))
    e_min = cons.resolve(refs.e_hat, refs.e_star)
    _check_range(e_min, refs.e_hat, refs.e_star, "uniform-policy to optimal return")

    def evaluate(lam):
        pi = solve_soft(mdp, lam * r)
        rho = occupancy_of_policy(mdp, pi)
        return pi, rho, expected_return(rho, r)

    spread = float(np.ptp(r))
    pi, rho, ret = evaluate(0.0)
    if ret >= e_min - FEASIBILITY_ATOL or spread == 0.0:
        return PlannerResult("meir", pi, rho, e_min, 0.0, ret, causal_entropy(rho), 0, True)

    cap = lambda_max if lambda_max is not None else 1e9 / spread
    lo, hi = 0.0, min(1.0 / spread, cap)
    iterations = 0
    pi, rho, ret = evaluate(hi)
    while ret < e_min and hi < cap:
        lo, hi = hi, min(4.0 * hi, cap)
        pi, rho, ret = evaluate(hi)
        iterations += 1
    if ret < e_min - return_tol:
        return PlannerResult("meir", pi, rho, e_min, hi, ret, causal_entropy(rho), iterations, False,
                             extra={"reason": "lambda cap reached"})
    while ret - e_min > return_tol and iterations < max_iter:
        mid = 0.5 * (lo + hi) if lo == 0.0 else float(np.sqrt(lo * hi))
        if not lo < mid < hi:
            break
        m_pi, m_rho, m_ret = evaluate(mid)
        if m_ret >= e_min:
            hi, pi, rho, ret = mid, m_pi, m_rho, m_ret
        else:
            lo = mid
        iterations += 1
    converged = ret >= e_min - return_tol and ret - e_min <= return_tol
    return PlannerResult("meir", pi, rho, e_min, hi, ret, causal_entropy(rho), iterations, converged)


# --------------------------------------------------------------------------
# MM


def default_lambda_max(r, r_minus) -> float:
    spread = float(np.ptp(r))
    if spread == 0.0:
        return 1.0
    return 1e6 * (float(np.max(np.abs(r_minus))) + 1.0) / spread


class _MmOracle:
    """Optimal policy and returns for the combined reward ``lambda*r + r_minus``."""

    def __init__(self, mdp, r, r_minus):
        self.mdp, self.r, self.r_minus = mdp, r, r_minus
        self.calls = 0

    def __call__(self, lam):
        self.calls += 1
        pi, q = solve_optimal(self.mdp, lam * self.r + self.r_minus)
        rho = occupancy_of_policy(self.mdp, pi)
        return pi, q, rho, expected_return(rho, self.r)


def mm_binary_search(mdp: TabularMdp, r, r_minus, constraint, lambda_max: float | None = None,
                     eps: float = 1e-9, mode: str = "feasible", max_iter: int = 200) -> PlannerResult:
    """Bisection on the reward weight of ``lambda*r + r_minus``.

    ``mode="feasible"`` returns the deterministic policy at the feasible end
    of the final bracket. ``mode="exact"`` mixes both bracket ends so the
    return meets ``e_min`` with equality.
    """
    if mode not in ("feasible", "exact"):
        raise ValueError("mode must be 'feasible' or 'exact'")
    r = mdp.reward if r is None else np.asarray(r, dtype=float)
    r_minus = np.asarray(r_minus, dtype=float)
    refs = reference_returns(mdp, r, r_minus)
    cons = _as_constraint(constraint)
    e_min = cons.resolve(refs.e_minus, refs.e_star)
    _check_range(e_min, refs.e_minus, refs.e_star, "anti-reward to optimal return")
    oracle = _MmOracle(mdp, r, r_minus)

    def result(policy, rho, lam, q, iterations, converged, extra=None):
        return PlannerResult("mm", policy, rho, e_min, lam, expected_return(rho, r),
                             expected_return(rho, r_minus), iterations, converged, q, extra or {})

    pi_i, q_i, rho_i, ret_i = oracle(0.0)
    if ret_i >= e_min - FEASIBILITY_ATOL:
        return result(pi_i, rho_i, 0.0, q_i, 0, True)

    cap = lambda_max if lambda_max is not None else default_lambda_max(r, r_minus)
    pi_j, q_j, rho_j, ret_j = oracle(cap)
    if ret_j < e_min - FEASIBILITY_ATOL:
        raise LambdaCapTooSmall(f"lambda_max={cap:.6g} reaches return {ret_j:.10g} < e_min={e_min:.10g}")
    lo, hi = 0.0, cap
    iterations = 0
    while hi - lo > eps * hi and iterations < max_iter:
        mid = 0.5 * (lo + hi)
        pi, q, rho, ret = oracle(mid)
        if ret >= e_min - FEASIBILITY_ATOL:
            hi, pi_j, q_j, rho_j, ret_j = mid, pi, q, rho, ret
        else:
            lo, pi_i, q_i, rho_i, ret_i = mid, pi, q, rho, ret
        iterations += 1
    converged = hi - lo <= eps * hi
    extra = {"lambda_low": lo, "lambda_high": hi, "return_low": ret_i, "return_high": ret_j}
    if mode == "feasible" or ret_j - ret_i <= 0.0:
        return result(pi_j, rho_j, hi, q_j, iterations, converged, extra)
    w = float(np.clip((e_min - ret_i) / (ret_j - ret_i), 0.0, 1.0))
    policy = MixedPolicy((pi_j, pi_i), np.array([w, 1.0 - w]))
    rho = w * rho_j + (1.0 - w) * rho_i
    return result(policy, rho, hi, q_j, iterations, converged, extra)


def mm_primal_dual(mdp: TabularMdp, r, r_minus, constraint, alpha: float = 0.1, iters: int = 2000,
                   lambda0: float = 0.0, window: int | None = None,
                   lambda_tol: float = 0.05) -> PlannerResult:
    """Projected dual descent on lambda with averaging of the primal iterates.

    The returned policy mixes the iterate policies of the last half of the
    run, each weighted by how often it occurred, so its occupancy equals the
    averaged occupancy.
    """
    if alpha <= 0 or iters < 2:
        raise ValueError("alpha must be positive and iters >= 2")
    r = mdp.reward if r is None else np.asarray(r, dtype=float)
    r_minus = np.asarray(r_minus, dtype=float)
    refs = reference_returns(mdp, r, r_minus)
    e_min = _as_constraint(constraint).resolve(refs.e_minus, refs.e_star)
    _check_range(e_min, refs.e_minus, refs.e_star, "anti-reward to optimal return")
    oracle = _MmOracle(mdp, r, r_minus)
    lam = float(lambda0)
    lambdas, keys, cache = [], [], {}
    for _ in range(iters):
        pi, _, rho, ret = oracle(lam)
        key = pi.argmax(axis=1).tobytes()
        cache.setdefault(key, (pi, rho))
        keys.append(key)
        lambdas.append(lam)
        lam = max(0.0, lam - alpha * (ret - e_min))
    tail = iters // 2
    counts: dict = {}
    for key in keys[tail:]:
        counts[key] = counts.get(key, 0) + 1
    order = sorted(counts, key=lambda k: keys.index(k))
    weights = np.array([counts[k] for k in order], dtype=float)
    weights /= weights.sum()
    members = tuple(cache[k][0] for k in order)
    rho = sum(w * cache[k][1] for w, k in zip(weights, order))
    policy = members[0] if len(members) == 1 else MixedPolicy(members, weights)
    window = window or max(1, iters // 10)
    recent = np.array(lambdas[-window:])
    converged = float(np.ptp(recent)) <= lambda_tol
    return PlannerResult("mm_primal_dual", policy, rho, e_min, float(np.mean(lambdas[tail:])),
                         expected_return(rho, r), expected_return(rho, r_minus), iters, converged,
                         extra={"lambda_trace": lambdas, "n_members": len(members)})


# --------------------------------------------------------------------------
# MMBE and MM^mix


def boltzmann(q: np.ndarray, beta: float) -> np.ndarray:
    if beta <= 0:
        raise ValueError("beta must be positive")
    return soft_policy(np.asarray(q) / beta)


def mmbe(mdp: TabularMdp, r, r_minus, constraint, beta: float = 1.0, **mm_kwargs) -> PlannerResult:
    """Boltzmann exploration on the MM combined-reward Q table.

    The constraint is not enforced; ``constraint_deviation`` reports the
    signed gap between the achieved return and ``e_min``.
    """
    mm = mm_binary_search(mdp, r, r_minus, constraint, mode="feasible", **mm_kwargs)
    r = mdp.reward if r is None else np.asarray(r, dtype=float)
    q = optimal_q(mdp, mm.lambda_star * r + np.asarray(r_minus, dtype=float))
    pi = boltzmann(q, beta)
    rho = occupancy_of_policy(mdp, pi)
    ret = expected_return(rho, r)
    return PlannerResult("mmbe", pi, rho, mm.e_min, mm.lambda_star, ret, expected_return(rho, r_minus),
                         mm.iterations, mm.converged, q,
                         {"beta": beta, "constraint_deviation": ret - mm.e_min, "mm_policy": mm.policy})


def mm_mix(mdp: TabularMdp, r, antireward_generator: Callable[[int], np.ndarray], constraint,
           n_mix: int = 3, seeds=None, weights=None, mode: str = "feasible", **mm_kwargs) -> PlannerResult:
    """Mixture of MM policies, one per anti-reward ``antireward_generator(seed)``.

    A fractional constraint is resolved once, against the largest anti-reward
    return among the members, so every member can meet the same floor.
    """
    seeds = list(range(n_mix)) if seeds is None else list(seeds)
    if len(seeds) != n_mix or n_mix < 1:
        raise ValueError("need n_mix >= 1 seeds")
    if weights is None:
        weights = np.full(n_mix, 1.0 / n_mix)
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (n_mix,) or np.any(weights < 0) or not np.isclose(weights.sum(), 1.0):
        raise ValueError("weights must be a probability vector of length n_mix")
    r = mdp.reward if r is None else np.asarray(r, dtype=float)
    anti = [np.asarray(antireward_generator(seed), dtype=float) for seed in seeds]
    cons = _as_constraint(constraint)
    refs = [reference_returns(mdp, r, am) for am in anti]
    e_min = cons.resolve(max(ref.e_minus for ref in refs), refs[0].e_star)
    results = [mm_binary_search(mdp, r, am, e_min, mode=mode, **mm_kwargs) for am in anti]
    members, member_w = [], []
    for w, res in zip(weights, results):
        if isinstance(res.policy, MixedPolicy):
            members.extend(res.policy.members)
            member_w.extend(w * res.policy.weights)
        else:
            members.append(res.policy)
            member_w.append(w)
    policy = MixedPolicy(tuple(members), np.array(member_w))
    rho = sum(w * res.occupancy for w, res in zip(weights, results))
    objective = float(sum(w * res.achieved_objective for w, res in zip(weights, results)))
    return PlannerResult("mm_mix", policy, rho, e_min, float(np.dot(weights, [x.lambda_star for x in results])),
                         expected_return(rho, r), objective, sum(x.iterations for x in results),
                         all(x.converged for x in results),
                         extra={"seeds": seeds, "weights": weights, "members": results, "anti_rewards": anti})
