"""Sweep execution: one row per (env seed, planner, threshold, observer)."""
from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from ..antireward import gen_anti_reward
from ..envs import FAMILIES
from ..errors import DegenerateVariance
from ..mdp import horizon_for, sample_trajectories
from ..metrics import epic, ordering_consistency, pearson, rollout_eval
from ..observers import irl_clustered, irl_from_demos, mce_irl
from ..planners import (RewardConstraint, meir, mm_binary_search, mm_mix, mm_primal_dual, mmbe,
                        reference_returns)
from .config import ExperimentConfig, ObserverConfig, PlannerConfig, Threshold

CONSTRAINED_PLANNERS = ("meir", "mm", "mm_mix")


@dataclass
class ResultRow:
    env_name: str
    env_seed: int
    planner: str
    antireward_kind: str | None
    observer: str
    threshold_frac: float | None
    e_min: float | None = None
    achieved_return: float | None = None
    achieved_entropy_or_antireturn: float | None = None
    lambda_star: float | None = None
    irl_rollout_return: float | None = None
    irl_rollout_ratio: float | None = None
    pearson: float | None = None
    epic: float | None = None
    ordering_consistency: float | None = None
    wall_time_ms: float | None = None
    # columns beyond the core schema
    e_star: float | None = None
    e_floor: float | None = None
    constraint_deviation: float | None = None
    irl_converged: bool | None = None
    error: str | None = None

    def as_dict(self) -> dict:
        return asdict(self)


COLUMNS = tuple(ResultRow.__dataclass_fields__)


def derive_seed(*parts: int) -> int:
    """Stable 32-bit seed from integer coordinates."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])


def anti_reward_for(mdp, planner: PlannerConfig, seed_offset: int = 0):
    cfg = planner.antireward
    if seed_offset:
        cfg = replace(cfg, seed=cfg.seed + seed_offset)
    return gen_anti_reward(mdp, mdp.reward, cfg)[0]


def constraint_for(threshold: Threshold) -> RewardConstraint:
    if threshold.frac is not None:
        return RewardConstraint(frac=threshold.frac)
    return RewardConstraint(e_min=threshold.e_min)


def run_planner(mdp, planner: PlannerConfig, threshold: Threshold, r_minus=None):
    """Plan with one configured planner; returns (PlannerResult, e_floor)."""
    params = dict(planner.params)
    constraint = constraint_for(threshold)
    r = mdp.reward
    if planner.type == "meir":
        res = meir(mdp, r, constraint, **params)
        return res, reference_returns(mdp, r).e_hat
    if planner.type == "mm_mix":
        n_mix = params.pop("n_mix", 3)
        res = mm_mix(mdp, r, lambda s: anti_reward_for(mdp, planner, s), constraint, n_mix=n_mix,
                     mode=params.pop("mode", "exact"), **params)
        floor = max(reference_returns(mdp, r, am).e_minus for am in res.extra["anti_rewards"])
        return res, floor
    if r_minus is None:
        r_minus = anti_reward_for(mdp, planner)
    floor = reference_returns(mdp, r, r_minus).e_minus
    if planner.type == "mmbe":
        return mmbe(mdp, r, r_minus, constraint, **params), floor
    if params.pop("solver", "binary_search") == "primal_dual":
        for key in ("mode", "lambda_max", "eps"):
            params.pop(key, None)
        return mm_primal_dual(mdp, r, r_minus, constraint, **params), floor
    for key in ("alpha", "iters", "lambda_tol"):
        params.pop(key, None)
    return mm_binary_search(mdp, r, r_minus, constraint, mode=params.pop("mode", "exact"), **params), floor


def run_observer(mdp, observer: ObserverConfig, policy, occupancy, seed: int):
    if observer.type == "mce_true":
        return mce_irl(mdp, occupancy, observer.irl)
    if observer.type == "mce_demos":
        horizon = observer.horizon or horizon_for(mdp.gamma)
        demos = sample_trajectories(mdp, policy, observer.n, horizon, seed)
        return irl_from_demos(mdp, demos, mdp.gamma, observer.irl)
    mode = "max" if observer.type == "irl_max" else "random"
    return irl_clustered(mdp, occupancy, observer.irl, mode, seed=derive_seed(observer.seed, seed),
                         mass_threshold=observer.mass_threshold)


def _metric(fn):
    try:
        return fn()
    except DegenerateVariance:
        return None


def _seed_rows(config: ExperimentConfig, env_seed: int) -> list[ResultRow]:
    family = config.env.family
    mdp = FAMILIES[family][1](config.env.spec(env_seed))
    r = mdp.reward
    rows = []
    anti_cache = {}
    for p_idx, planner in enumerate(config.planners):
        r_minus = None
        if planner.type in ("mm", "mmbe"):
            key = planner.antireward
            if key not in anti_cache:
                anti_cache[key] = anti_reward_for(mdp, planner)
            r_minus = anti_cache[key]
        for t_idx, threshold in enumerate(config.thresholds):
            base = dict(env_name=family, env_seed=env_seed, planner=planner.type,
                        antireward_kind=planner.antireward_kind, threshold_frac=threshold.frac)
            start = time.perf_counter()
            try:
                result, floor = run_planner(mdp, planner, threshold, r_minus)
            except Exception as exc:  # one failing cell must not stop the sweep
                for observer in config.observers:
                    rows.append(ResultRow(observer=observer.type, error=f"{type(exc).__name__}: {exc}", **base))
                continue
            plan_ms = (time.perf_counter() - start) * 1e3
            e_star = reference_returns(mdp, r).e_star
            for o_idx, observer in enumerate(config.observers):
                start = time.perf_counter()
                row = ResultRow(
                    observer=observer.type, e_min=result.e_min, achieved_return=result.achieved_return,
                    achieved_entropy_or_antireturn=result.achieved_objective, lambda_star=result.lambda_star,
                    e_star=e_star, e_floor=floor, constraint_deviation=result.constraint_deviation, **base)
                try:
                    cell_seed = derive_seed(config.seed, env_seed, p_idx, t_idx, o_idx)
                    rec = run_observer(mdp, observer, result.policy, result.occupancy, cell_seed)
                    row.irl_converged = rec.converged
                    if "rollout" in config.metrics:
                        row.irl_rollout_return, row.irl_rollout_ratio = rollout_eval(mdp, r, rec.reward)
                    if "pearson" in config.metrics:
                        row.pearson = _metric(lambda: pearson(r, rec.reward))
                    if "epic" in config.metrics:
                        row.epic = _metric(lambda: epic(r, rec.reward, mdp.n_states, mdp.n_actions, mdp.gamma))
                    if "ordering" in config.metrics:
                        row.ordering_consistency = ordering_consistency(mdp, r, rec.reward, config.ordering_pairs,
                                                                        cell_seed)
                except Exception as exc:
                    row.error = f"{type(exc).__name__}: {exc}"
                if config.timing:
                    row.wall_time_ms = plan_ms + (time.perf_counter() - start) * 1e3
                rows.append(row)
    return rows


def run_experiment(config: ExperimentConfig, jobs: int = 1) -> list[ResultRow]:
    """Run the full sweep; rows come back in cell order whatever ``jobs`` is."""
    seeds = list(config.env.seeds)
    if jobs > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_seed_rows, [config] * len(seeds), seeds))
    else:
        chunks = [_seed_rows(config, s) for s in seeds]
    return [row for chunk in chunks for row in chunk]
