import json
from pathlib import Path

import pytest

from rewardprivacy.antireward import ALL_KINDS
from rewardprivacy.bench import (COLUMNS, ResultRow, load_config, read_results, render_plot, rows_to_csv,
                                 run_experiment, svg_plot, validate_experiment, write_results)
from rewardprivacy.bench.config import OBSERVER_TYPES, PLANNER_TYPES, parse_json_text
from rewardprivacy.bench.runner import derive_seed
from rewardprivacy.errors import ParseError, ValidationError

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = {
    "name": "mini",
    "env": {"family": "frozen_lake", "params": {"grid_size": 4}, "seeds": [0]},
    "planners": [
        {"type": "meir"},
        {"type": "mm", "antireward": {"kind": "forward_kl"}, "params": {"mode": "exact"}},
    ],
    "thresholds": [0.2, 0.5, 0.8],
    "observers": [{"type": "mce_true"}],
    "ordering_pairs": 50,
}

GOLDEN_COLUMNS = (
    "env_name", "env_seed", "planner", "antireward_kind", "observer", "threshold_frac", "e_min",
    "achieved_return", "achieved_entropy_or_antireturn", "lambda_star", "irl_rollout_return",
    "irl_rollout_ratio", "pearson", "epic", "ordering_consistency", "wall_time_ms",
    "e_star", "e_floor", "constraint_deviation", "irl_converged", "error",
)


def with_changes(**changes):
    data = json.loads(json.dumps(MINIMAL))
    data.update(changes)
    return data


@pytest.fixture(scope="module")
def mini_rows():
    return run_experiment(validate_experiment(MINIMAL))


# validation

def test_threshold_out_of_range_message():
    with pytest.raises(ValidationError) as err:
        validate_experiment(with_changes(thresholds=[0.2, 1.2]))
    assert "thresholds[1] out of [0,1]" in err.value.violations


def test_out_of_scope_planner_rejected():
    with pytest.raises(ValidationError) as err:
        validate_experiment(with_changes(planners=[{"type": "dqfn"}]))
    assert "rejected" in str(err.value)
    with pytest.raises(ValidationError):
        validate_experiment(with_changes(observers=[{"type": "iq_learn"}]))


def test_unknown_field_and_all_violations_reported():
    data = with_changes(colour="blue", thresholds=[-0.1], metrics=["spearman"])
    with pytest.raises(ValidationError) as err:
        validate_experiment(data)
    assert len(err.value.violations) == 3
    assert "config.colour is not a known field" in err.value.violations


def test_unknown_antireward_kind():
    planners = [{"type": "mm", "antireward": {"kind": "renyi"}}]
    with pytest.raises(ValidationError, match="renyi"):
        validate_experiment(with_changes(planners=planners))


def test_parse_error_carries_line():
    with pytest.raises(ParseError) as err:
        parse_json_text('{\n  "name": "x",\n  "env": \n}')
    assert err.value.line == 4


def test_load_config_reads_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(MINIMAL))
    config = load_config(path)
    assert config.name == "mini" and len(config.thresholds) == 3
    with pytest.raises(ParseError):
        load_config(tmp_path / "missing.json")


# sweep

def test_sweep_has_one_row_per_cell(mini_rows):
    assert len(mini_rows) == 6
    assert [(r.planner, r.threshold_frac) for r in mini_rows] == [
        (p, t) for p in ("meir", "mm") for t in (0.2, 0.5, 0.8)]
    assert all(r.error is None for r in mini_rows)


def test_constrained_rows_are_feasible(mini_rows):
    for row in mini_rows:
        assert row.achieved_return >= row.e_min - 1e-6
        assert row.constraint_deviation == pytest.approx(row.achieved_return - row.e_min)


def test_sweep_csv_is_deterministic(mini_rows):
    again = run_experiment(validate_experiment(MINIMAL))
    assert rows_to_csv(again) == rows_to_csv(mini_rows)


def test_derive_seed_is_stable():
    assert derive_seed(0, 1, 2) == derive_seed(0, 1, 2)
    assert derive_seed(0, 1, 2) != derive_seed(0, 2, 1)


# CSV

def test_golden_column_order():
    assert COLUMNS == GOLDEN_COLUMNS
    assert rows_to_csv([]) == ",".join(GOLDEN_COLUMNS) + "\r\n"


def test_csv_roundtrip_and_nulls(tmp_path):
    row = ResultRow(env_name="four_rooms", env_seed=3, planner="mm", antireward_kind=None, observer="irl_max",
                    threshold_frac=0.5, pearson=0.25, irl_converged=True, error='bad "cell", x')
    path = write_results([row], tmp_path / "out" / "r.csv")
    text = path.read_text()
    assert '"bad ""cell"", x"' in text
    back = read_results(path)[0]
    assert back["antireward_kind"] is None and back["epic"] is None
    assert back["pearson"] == 0.25 and back["irl_converged"] is True
    assert back["error"] == 'bad "cell", x'


# plots

def test_svg_is_deterministic(mini_rows, tmp_path):
    assert svg_plot(mini_rows, "mini") == svg_plot(mini_rows, "mini")
    a = render_plot(mini_rows, out_dir=tmp_path / "a")
    b = render_plot(mini_rows, out_dir=tmp_path / "b")
    assert len(a) == 2
    assert [p.read_bytes() for p in a] == [p.read_bytes() for p in b]
    assert a[0].read_text().startswith("<svg")


# shipped configs

def test_shipped_configs_cover_every_component():
    planners, kinds, observers = set(), set(), set()
    for path in sorted(CONFIG_DIR.glob("*.json")):
        config = load_config(path)
        planners |= {p.type for p in config.planners}
        kinds |= {p.antireward_kind for p in config.planners if p.antireward_kind}
        observers |= {o.type for o in config.observers}
    assert planners == set(PLANNER_TYPES)
    assert kinds == set(ALL_KINDS)
    assert observers == set(OBSERVER_TYPES)
