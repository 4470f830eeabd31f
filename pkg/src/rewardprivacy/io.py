"""JSON encoding for MDPs, policies, occupancies and reward tables.

Floats are written with 17 significant digits so that a dump/load round trip
is bit-exact, and keys keep insertion order so that equal objects serialise
to equal bytes.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .mdp import MixedPolicy, TabularMdp


def _fmt_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialise non-finite value {x!r}")
    text = format(x, ".17g")
    if "e" not in text and "." not in text and "n" not in text:
        text += ".0"
    return text


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1)) if indent else ""
    end = " " * (indent * level) if indent else ""
    nl = "\n" if indent else ""
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (np.floating, float)):
        return _fmt_float(obj)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if obj is None or isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{" + nl + ("," + nl).join(items) + nl + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        # numeric rows stay on one line to keep files compact
        if all(not isinstance(v, (list, tuple, dict, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[" + nl + ("," + nl).join(items) + nl + end + "]"
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent: int = 1) -> str:
    return _encode(obj, indent, 0) + "\n"


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def read_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def mdp_to_dict(mdp: TabularMdp) -> dict:
    return {
        "n_states": mdp.n_states,
        "n_actions": mdp.n_actions,
        "gamma": mdp.gamma,
        "transition": mdp.transition,
        "reward": mdp.reward,
        "initial_dist": mdp.initial_dist,
    }


def mdp_from_dict(data: dict) -> TabularMdp:
    mdp = TabularMdp(
        np.asarray(data["transition"], dtype=float),
        np.asarray(data["reward"], dtype=float),
        float(data["gamma"]),
        np.asarray(data["initial_dist"], dtype=float),
    )
    if (mdp.n_states, mdp.n_actions) != (data["n_states"], data["n_actions"]):
        raise ValueError("n_states/n_actions disagree with the array shapes")
    return mdp


def policy_to_dict(policy) -> dict:
    if isinstance(policy, MixedPolicy):
        return {"members": [{"probs": m} for m in policy.members], "weights": policy.weights}
    return {"probs": np.asarray(policy)}


def policy_from_dict(data: dict):
    if "members" in data:
        return MixedPolicy(tuple(np.asarray(m["probs"], dtype=float) for m in data["members"]),
                           np.asarray(data["weights"], dtype=float))
    return np.asarray(data["probs"], dtype=float)


def occupancy_to_dict(rho) -> dict:
    return {"rho": np.asarray(rho)}


def occupancy_from_dict(data: dict) -> np.ndarray:
    return np.asarray(data["rho"], dtype=float)


def reward_to_dict(reward, header: dict | None = None) -> dict:
    out = {}
    if header is not None:
        out["header"] = dict(header)
    out["reward"] = np.asarray(reward)
    return out


def reward_from_dict(data: dict) -> np.ndarray:
    return np.asarray(data["reward"], dtype=float)
