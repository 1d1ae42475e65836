"""Tests for config parsing and validation."""

import pytest
import yaml
from pydantic import ValidationError

from nettmle.config import (
    DEFAULT_P_OMEGA_GRID,
    ExperimentSpec,
    PolicySpec,
    SimConfig,
    TrainConfig,
    parse_config,
)


def _write(tmp_path, data) -> str:
    path = tmp_path / "sweep.yaml"
    path.write_text(yaml.safe_dump(data))
    return str(path)


def test_minimal_config_fills_defaults(tmp_path):
    spec = parse_config(_write(tmp_path, {"graph_kinds": ["uniform"]}))
    assert spec.sizes == [500]
    assert spec.repeats == 30
    assert spec.truth_reps == 30
    assert spec.sim.infectious_duration == 5
    assert spec.sim.quarantine_period == 2
    assert spec.estimator.weight_bounds == (0.01, 100.0)
    assert spec.estimator.train.reception_field == 9


def test_default_grid_has_nineteen_levels(tmp_path):
    spec = parse_config(_write(tmp_path, {"p_omega_grid": "default"}))
    assert spec.p_omega_grid == DEFAULT_P_OMEGA_GRID
    assert len(spec.p_omega_grid) == 19
    assert spec.p_omega_grid[0] == 0.05
    assert spec.p_omega_grid[-1] == 0.95


def test_unsupported_size_is_named(tmp_path):
    with pytest.raises(ValidationError, match="3000"):
        parse_config(_write(tmp_path, {"sizes": [500, 3000]}))


def test_custom_sizes_can_be_allowed(tmp_path):
    spec = parse_config(_write(tmp_path, {"sizes": [3000], "allow_custom_sizes": True}))
    assert spec.sizes == [3000]


def test_unknown_key_is_named(tmp_path):
    with pytest.raises(ValidationError, match="replicates"):
        parse_config(_write(tmp_path, {"replicates": 3}))


def test_unknown_nested_key_is_rejected(tmp_path):
    with pytest.raises(ValidationError, match="beta"):
        parse_config(_write(tmp_path, {"sim": {"beta": 0.2}}))


def test_unknown_enum_value(tmp_path):
    with pytest.raises(ValidationError):
        parse_config(_write(tmp_path, {"scenarios": ["CC", "XY"]}))


def test_malformed_number(tmp_path):
    with pytest.raises(ValidationError):
        parse_config(_write(tmp_path, {"repeats": "many"}))


def test_grid_values_must_be_open_unit_interval(tmp_path):
    with pytest.raises(ValidationError):
        parse_config(_write(tmp_path, {"p_omega_grid": [0.0, 0.5]}))


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        parse_config(tmp_path / "absent.yaml")


def test_output_dir_env_override(tmp_path, monkeypatch):
    monkeypatch.setenv("NETTMLE_OUT", str(tmp_path / "elsewhere"))
    spec = parse_config(_write(tmp_path, {"output_dir": "results"}))
    assert spec.output_dir == str(tmp_path / "elsewhere")


def test_from_env_reads_config_path(tmp_path, monkeypatch):
    monkeypatch.delenv("NETTMLE_OUT", raising=False)
    monkeypatch.setenv("NETTMLE_CONFIG", _write(tmp_path, {"repeats": 4}))
    assert ExperimentSpec.from_env().repeats == 4


def test_powerlaw_2000_uses_fewer_repeats():
    spec = ExperimentSpec()
    assert spec.repeats_for("powerlaw", 2000) == 15
    assert spec.repeats_for("uniform", 2000) == 30


def test_policy_cells_pair_all_with_full_budget():
    spec = ExperimentSpec(budgets=[1.0, 0.5], priorities=["all", "most_connected"])
    assert spec.policy_cells() == [(1.0, "all"), (0.5, "most_connected")]


def test_policy_label():
    assert PolicySpec(p_omega=0.35).label == "p0.35-b1-all"
    assert PolicySpec(p_omega=0.5, budget_fraction=0.3, priority="least_connected").label == "p0.50-b0.3-least_connected"
    assert PolicySpec.observational().label == "observational"


def test_initial_infected_count_rounds_up():
    assert SimConfig(init_infected_fraction=0.01).initial_infected_count(150) == 2


def test_lambda_is_zero_without_adaptation():
    assert TrainConfig(domain_adaptation=False).lambda_at(0.7) == 0.0
