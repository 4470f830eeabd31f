"""Strict JSON configuration for sweeps and single CLI runs.

Every object is checked for unknown keys and wrong types; all problems in a
file are collected and reported together.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from ..antireward import ALL_KINDS, AntiRewardConfig
from ..envs import FAMILIES, make_spec
from ..errors import ParseError, ValidationError
from ..observers import IrlConfig

PLANNER_TYPES = ("meir", "mm", "mmbe", "mm_mix")
OBSERVER_TYPES = ("mce_true", "mce_demos", "irl_max", "irl_random")
METRICS = ("pearson", "epic", "rollout", "ordering")
OUT_OF_SCOPE = {
    "dqfn": "DQFN (noisy deep Q-learning) is outside this package",
    "iq_learn": "IQ-Learn (neural inverse RL) is outside this package",
    "iqlearn": "IQ-Learn (neural inverse RL) is outside this package",
}

PLANNER_PARAMS = {
    "meir": {"return_tol": float, "lambda_max": float},
    "mm": {"mode": str, "lambda_max": float, "eps": float, "solver": str, "alpha": float, "iters": int,
           "lambda_tol": float},
    "mmbe": {"beta": float, "lambda_max": float, "eps": float},
    "mm_mix": {"n_mix": int, "seeds": list, "weights": list, "mode": str, "lambda_max": float, "eps": float},
}
ANTIREWARD_FIELDS = {"kind": str, "iterations": int, "smoothing_eps": float, "clip": list,
                     "merl_temperature": float, "seed": int, "init": str, "w1_iters": int, "w1_method": str}
IRL_FIELDS = {"learning_rate": float, "lr_decay": float, "max_iters": int, "grad_tol": float, "init": str,
              "seed": int, "reward_type": str, "optimizer": str, "patience": int}


@dataclass(frozen=True)
class EnvConfig:
    family: str
    params: dict
    seeds: tuple

    def spec(self, seed):
        return make_spec(self.family, self.params, seed)


@dataclass(frozen=True)
class PlannerConfig:
    type: str
    params: dict = field(default_factory=dict)
    antireward: AntiRewardConfig | None = None

    @property
    def antireward_kind(self) -> str | None:
        return self.antireward.kind_name if self.antireward is not None else None


@dataclass(frozen=True)
class ObserverConfig:
    type: str
    irl: IrlConfig = field(default_factory=IrlConfig)
    n: int = 10
    horizon: int | None = None
    seed: int = 0
    mass_threshold: float = 0.05


@dataclass(frozen=True)
class Threshold:
    frac: float | None = None
    e_min: float | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    env: EnvConfig
    planners: tuple
    thresholds: tuple
    observers: tuple
    metrics: tuple = METRICS
    ordering_pairs: int = 2000
    output: str = "results"
    seed: int = 0
    timing: bool = False


# --------------------------------------------------------------------------
# parsing helpers


def parse_json_text(text: str, source: str = "<config>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: {exc.msg}", line=exc.lineno) from None


def read_config_file(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_json_text(text, str(path))


class _Checker:
    def __init__(self):
        self.violations = []

    def fail(self, message):
        self.violations.append(message)

    def obj(self, value, where, allowed, required=()):
        if not isinstance(value, dict):
            self.fail(f"{where} must be an object")
            return {}
        for key in value:
            if key not in allowed:
                self.fail(f"{where}.{key} is not a known field")
        for key in required:
            if key not in value:
                self.fail(f"{where}.{key} is required")
        return value

    def typed(self, value, kind, where):
        if kind is float:
            ok = isinstance(value, (int, float)) and not isinstance(value, bool)
        elif kind is int:
            ok = isinstance(value, int) and not isinstance(value, bool)
        else:
            ok = isinstance(value, kind)
        if not ok:
            self.fail(f"{where} must be of type {kind.__name__}")
        return ok

    def fields(self, value, where, spec):
        value = self.obj(value, where, spec)
        out = {}
        for key, kind in spec.items():
            if key in value and self.typed(value[key], kind, f"{where}.{key}"):
                out[key] = value[key]
        return out

    def build(self, factory, kwargs, where):
        try:
            return factory(**kwargs)
        except (TypeError, ValueError) as exc:
            self.fail(f"{where}: {exc}")
            return None


def _antireward(check, value, where):
    values = check.fields(value, where, ANTIREWARD_FIELDS)
    if "kind" in values and values["kind"] not in ALL_KINDS:
        check.fail(f"{where}.kind {values['kind']!r} is not one of {list(ALL_KINDS)}")
        return None
    if "clip" in values:
        values["clip"] = tuple(values["clip"])
    return check.build(AntiRewardConfig, values, where)


def _irl(check, value, where):
    if value is None:
        return IrlConfig()
    return check.build(IrlConfig, check.fields(value, where, IRL_FIELDS), where) or IrlConfig()


def _env(check, value, where, single_seed=False):
    allowed = ("family", "params", "seed") if single_seed else ("family", "params", "seeds")
    value = check.obj(value, where, allowed, required=("family",))
    family = value.get("family")
    if family is not None and family not in FAMILIES:
        check.fail(f"{where}.family {family!r} is not one of {sorted(FAMILIES)}")
        return None
    params = value.get("params", {})
    if not isinstance(params, dict):
        check.fail(f"{where}.params must be an object")
        params = {}
    if single_seed:
        seeds = [value.get("seed", 0)]
    else:
        seeds = value.get("seeds", [0])
        if not isinstance(seeds, list) or not seeds:
            check.fail(f"{where}.seeds must be a non-empty list")
            seeds = []
    for i, s in enumerate(seeds):
        check.typed(s, int, f"{where}.seeds[{i}]" if not single_seed else f"{where}.seed")
    if family is None:
        return None
    try:
        make_spec(family, params, 0)
    except (TypeError, ValueError) as exc:
        check.fail(f"{where}.params: {exc}")
        return None
    return EnvConfig(family, dict(params), tuple(s for s in seeds if isinstance(s, int)))


def _planner(check, value, where):
    if isinstance(value, dict) and isinstance(value.get("type"), str) and value["type"].lower() in OUT_OF_SCOPE:
        check.fail(f"{where}.type {value['type']!r} rejected: {OUT_OF_SCOPE[value['type'].lower()]}")
        return None
    value = check.obj(value, where, ("type", "params", "antireward"), required=("type",))
    kind = value.get("type")
    if kind is None:
        return None
    if kind not in PLANNER_TYPES:
        check.fail(f"{where}.type {kind!r} is not one of {list(PLANNER_TYPES)}")
        return None
    params = check.fields(value.get("params", {}), f"{where}.params", PLANNER_PARAMS[kind])
    if params.get("mode", "exact") not in ("exact", "feasible"):
        check.fail(f"{where}.params.mode must be 'exact' or 'feasible'")
    if params.get("solver", "binary_search") not in ("binary_search", "primal_dual"):
        check.fail(f"{where}.params.solver must be 'binary_search' or 'primal_dual'")
    anti = None
    if kind != "meir":
        anti = _antireward(check, value.get("antireward", {}), f"{where}.antireward")
    elif "antireward" in value:
        check.fail(f"{where}.antireward is not used by meir")
    return PlannerConfig(kind, params, anti)


def _observer(check, value, where):
    if isinstance(value, dict) and isinstance(value.get("type"), str) and value["type"].lower() in OUT_OF_SCOPE:
        check.fail(f"{where}.type {value['type']!r} rejected: {OUT_OF_SCOPE[value['type'].lower()]}")
        return None
    value = check.obj(value, where, ("type", "irl", "n", "horizon", "seed", "mass_threshold"), required=("type",))
    kind = value.get("type")
    if kind is None:
        return None
    if kind not in OBSERVER_TYPES:
        check.fail(f"{where}.type {kind!r} is not one of {list(OBSERVER_TYPES)}")
        return None
    kwargs = {"type": kind, "irl": _irl(check, value.get("irl"), f"{where}.irl")}
    for key, typ in (("n", int), ("seed", int), ("mass_threshold", float)):
        if key in value and check.typed(value[key], typ, f"{where}.{key}"):
            kwargs[key] = value[key]
    if value.get("horizon") is not None and check.typed(value["horizon"], int, f"{where}.horizon"):
        kwargs["horizon"] = value["horizon"]
    if kwargs.get("n", 10) < 1:
        check.fail(f"{where}.n must be >= 1")
    if kwargs.get("horizon") is not None and kwargs["horizon"] < 1:
        check.fail(f"{where}.horizon must be >= 1")
    if not 0 < kwargs.get("mass_threshold", 0.05) < 1:
        check.fail(f"{where}.mass_threshold out of (0,1)")
    return ObserverConfig(**kwargs)


def _threshold(check, value, where):
    if isinstance(value, dict):
        value = check.obj(value, where, ("e_min",), required=("e_min",))
        if "e_min" in value and check.typed(value["e_min"], float, f"{where}.e_min"):
            return Threshold(e_min=float(value["e_min"]))
        return None
    if not check.typed(value, float, where):
        return None
    if not 0.0 <= value <= 1.0:
        check.fail(f"{where} out of [0,1]")
        return None
    return Threshold(frac=float(value))


EXPERIMENT_FIELDS = ("name", "env", "planners", "thresholds", "observers", "metrics", "ordering_pairs",
                     "output", "seed", "timing")


def validate_experiment(data) -> ExperimentConfig:
    check = _Checker()
    data = check.obj(data, "config", EXPERIMENT_FIELDS, required=("env", "planners", "thresholds", "observers"))
    env = _env(check, data.get("env"), "env") if "env" in data else None

    def items(key, parser):
        value = data.get(key)
        if key not in data:
            return []
        if not isinstance(value, list) or not value:
            check.fail(f"{key} must be a non-empty list")
            return []
        return [parser(check, v, f"{key}[{i}]") for i, v in enumerate(value)]

    planners = items("planners", _planner)
    thresholds = items("thresholds", _threshold)
    observers = items("observers", _observer)
    metrics = data.get("metrics", list(METRICS))
    if not isinstance(metrics, list) or not all(isinstance(m, str) for m in metrics):
        check.fail("metrics must be a list of names")
        metrics = []
    for m in metrics:
        if m not in METRICS:
            check.fail(f"metrics: unknown metric {m!r}")
    scalars = {}
    for key, typ in (("name", str), ("ordering_pairs", int), ("output", str), ("seed", int), ("timing", bool)):
        if key in data and check.typed(data[key], typ, key):
            scalars[key] = data[key]
    if scalars.get("ordering_pairs", 1) < 1:
        check.fail("ordering_pairs must be >= 1")
    if check.violations:
        raise ValidationError(check.violations)
    return ExperimentConfig(
        name=scalars.get("name", "experiment"),
        env=env,
        planners=tuple(planners),
        thresholds=tuple(thresholds),
        observers=tuple(observers),
        metrics=tuple(m for m in METRICS if m in metrics),
        ordering_pairs=scalars.get("ordering_pairs", 2000),
        output=scalars.get("output", "results"),
        seed=scalars.get("seed", 0),
        timing=scalars.get("timing", False),
    )


def load_config(path) -> ExperimentConfig:
    return validate_experiment(read_config_file(path))


# --------------------------------------------------------------------------
# single-run sections used by the CLI


def parse_sections(data, sections: dict, where="config"):
    """Validate a single-run CLI config; ``sections`` maps key -> (parser, required)."""
    check = _Checker()
    data = check.obj(data, where, tuple(sections), required=tuple(k for k, (_, req) in sections.items() if req))
    out = {}
    for key, (parser, _) in sections.items():
        if key in data:
            out[key] = parser(check, data[key], key)
    if check.violations:
        raise ValidationError(check.violations)
    return out


def single_env(check, value, where):
    return _env(check, value, where, single_seed=True)


def planner_section(check, value, where):
    return _planner(check, value, where)


def observer_section(check, value, where):
    return _observer(check, value, where)


def antireward_section(check, value, where):
    return _antireward(check, value, where)


def threshold_section(check, value, where):
    return _threshold(check, value, where)


def path_section(check, value, where):
    if check.typed(value, str, where):
        return value
    return None


def metrics_section(check, value, where):
    if not isinstance(value, list) or not all(isinstance(m, str) and m in METRICS for m in value):
        check.fail(f"{where} must be a list drawn from {list(METRICS)}")
        return None
    return tuple(m for m in METRICS if m in value)


def int_section(check, value, where):
    return value if check.typed(value, int, where) else None
