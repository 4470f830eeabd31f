"""Command-line entry point: ``rewardprivacy <command> --config FILE --out DIR``.

Exit status is 0 on success, 1 when the configuration is invalid and 2 when
a run fails.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .bench.config import (antireward_section, int_section, load_config, metrics_section, observer_section,
                           parse_sections, path_section, planner_section, read_config_file, single_env,
                           threshold_section)
from .bench.plot import render_plot
from .bench.results import write_results
from .bench.runner import run_experiment, run_observer, run_planner
from .antireward import gen_anti_reward
from .envs import FAMILIES
from .errors import ConfigError, DegenerateVariance, ValidationError
from .mdp import occupancy_of_policy
from .metrics import epic, ordering_consistency, pearson, rollout_eval


def _load(args, sections):
    data = read_config_file(args.config)
    parsed = parse_sections(data, sections)
    env = parsed.get("env")
    if env is not None and args.seed is not None:
        parsed["env"] = replace(env, seeds=(args.seed,))
    return parsed


def _build_env(env_cfg):
    seed = env_cfg.seeds[0]
    return FAMILIES[env_cfg.family][1](env_cfg.spec(seed)), seed


def _env_header(env_cfg, seed):
    return {"family": env_cfg.family, "params": env_cfg.params, "seed": seed}


def _resolve(config_path, rel):
    p = Path(rel)
    return p if p.is_absolute() else Path(config_path).resolve().parent / p


def cmd_plan(args):
    cfg = _load(args, {"env": (single_env, True), "planner": (planner_section, True),
                       "threshold": (threshold_section, True)})
    mdp, seed = _build_env(cfg["env"])
    result, floor = run_planner(mdp, cfg["planner"], cfg["threshold"])
    header = {"env": _env_header(cfg["env"], seed), **result.header(), "e_floor": floor,
              "antireward_kind": cfg["planner"].antireward_kind}
    io.write_json({"header": header, "policy": io.policy_to_dict(result.policy),
                   "occupancy": io.occupancy_to_dict(result.occupancy)}, Path(args.out) / "plan.json")


def cmd_antireward(args):
    cfg = _load(args, {"env": (single_env, True), "antireward": (antireward_section, True)})
    mdp, seed = _build_env(cfg["env"])
    reward, diag = gen_anti_reward(mdp, mdp.reward, cfg["antireward"])
    header = {"env": _env_header(cfg["env"], seed), **cfg["antireward"].header(), "diagnostics": diag.to_dict()}
    io.write_json(io.reward_to_dict(reward, header), Path(args.out) / "antireward.json")


def cmd_observe(args):
    cfg = _load(args, {"env": (single_env, True), "source": (path_section, True),
                       "observer": (observer_section, True)})
    mdp, seed = _build_env(cfg["env"])
    data = io.read_json(_resolve(args.config, cfg["source"]))
    policy = io.policy_from_dict(data["policy"]) if "policy" in data else None
    occupancy = (io.occupancy_from_dict(data["occupancy"]) if "occupancy" in data
                 else occupancy_of_policy(mdp, policy) if policy is not None
                 else io.occupancy_from_dict(data))
    observer = cfg["observer"]
    if observer.type == "mce_demos" and policy is None:
        raise ValidationError(["observer mce_demos needs a policy, not just an occupancy"])
    rec = run_observer(mdp, observer, policy, occupancy, seed if args.seed is None else args.seed)
    header = {"env": _env_header(cfg["env"], seed), "observer": observer.type, "converged": rec.converged,
              "final_occupancy_gap": rec.final_occupancy_gap, "iterations_used": rec.iterations_used}
    io.write_json(io.reward_to_dict(rec.reward, header), Path(args.out) / "recovered.json")


def cmd_evaluate(args):
    cfg = _load(args, {"env": (single_env, True), "recovered": (path_section, True),
                       "reference": (path_section, False), "metrics": (metrics_section, False),
                       "ordering_pairs": (int_section, False)})
    mdp, seed = _build_env(cfg["env"])
    r_tilde = io.reward_from_dict(io.read_json(_resolve(args.config, cfg["recovered"])))
    r_true = (io.reward_from_dict(io.read_json(_resolve(args.config, cfg["reference"])))
              if "reference" in cfg else mdp.reward)
    metrics = cfg.get("metrics") or ("pearson", "epic", "rollout", "ordering")
    out = {"env": _env_header(cfg["env"], seed)}

    def safe(fn):
        try:
            return fn()
        except DegenerateVariance:
            return None

    if "pearson" in metrics:
        out["pearson"] = safe(lambda: pearson(r_true, r_tilde))
    if "epic" in metrics:
        out["epic"] = safe(lambda: epic(r_true, r_tilde, mdp.n_states, mdp.n_actions, mdp.gamma))
    if "rollout" in metrics:
        ret, ratio = rollout_eval(mdp.with_reward(r_true), r_true, r_tilde)
        out["rollout_return"], out["rollout_ratio"] = ret, (None if np.isnan(ratio) else ratio)
    if "ordering" in metrics:
        out["ordering_consistency"] = ordering_consistency(mdp, r_true, r_tilde, cfg.get("ordering_pairs") or 2000,
                                                           seed)
    io.write_json(out, Path(args.out) / "metrics.json")


def cmd_bench(args):
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    out = Path(args.out) if args.out else Path(config.output)
    rows = run_experiment(config, jobs=args.jobs)
    write_results(rows, out / "results.csv")
    render_plot(rows, out_dir=out / "plots")


COMMANDS = {
    "plan": (cmd_plan, "plan a private policy for one environment and threshold"),
    "antireward": (cmd_antireward, "generate an anti-reward table"),
    "observe": (cmd_observe, "recover a reward from a policy or occupancy"),
    "evaluate": (cmd_evaluate, "compare a recovered reward with the true one"),
    "bench": (cmd_bench, "run a sweep and write results.csv and SVG plots"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rewardprivacy", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", default=None if name == "bench" else ".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes (bench only)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; here a bad command line is a validation error
        return 1 if exc.code == 2 else (exc.code or 0)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 1
    try:
        COMMANDS[args.command][0](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
