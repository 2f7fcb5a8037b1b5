"""Unit tests for experiment configuration files."""

import json
from dataclasses import dataclass, replace

import pytest

from ssmi_lab.core.config import (
    ExperimentConfig,
    apply_overrides,
    config_hash,
    load_config,
)
from ssmi_lab.core.errors import ConfigError
from ssmi_lab.core.models import Ablation, LvlmConfig, Stage
from tests.conftest import experiment_dict


@pytest.mark.unit
def test_load_config(config_file):
    config = load_config(config_file)

    assert config.model.d == 8
    assert config.train.steps == 3
    assert config.train.stage is Stage.FINETUNE
    assert config.data.vocab == config.model.vocab == 4
    assert config.data.d_raw == config.model.d_raw == 4
    assert config.eval.seeds == (0, 1)
    assert config.overrides == {}


@pytest.mark.unit
def test_defaults_fill_optional_fields(tmp_path):
    raw = {"train": {"steps": 1}, "paths": experiment_dict(tmp_path)["paths"]}

    config = ExperimentConfig.from_dict(raw)

    assert config.model == LvlmConfig()
    assert config.train.lam == 0.5


@dataclass
class BadConfigCase:
    name: str
    mutate: str
    field: str


def _mutated(root, case: str) -> dict:
    raw = experiment_dict(root)
    if case == "missing steps":
        del raw["train"]["steps"]
    elif case == "missing checkpoint":
        del raw["paths"]["checkpoint"]
    elif case == "unknown field":
        raw["model"]["depth"] = 3
    elif case == "unknown section":
        raw["optimizer"] = {}
    elif case == "derived vocab":
        raw["data"]["vocab"] = 4
    elif case == "bool for int":
        raw["model"]["d"] = True
    elif case == "string for float":
        raw["train"]["lr"] = "fast"
    elif case == "bad enum":
        raw["model"]["ablation"] = "no_attention"
    elif case == "lambda out of range":
        raw["train"]["lambda"] = 1.5
    elif case == "heads do not divide":
        raw["model"]["n_heads"] = 3
    elif case == "caption too long":
        raw["data"]["T"] = 8
    elif case == "empty sigmas":
        raw["eval"]["sigmas"] = []
    return raw


BAD_CONFIG_CASES = [
    BadConfigCase("missing steps", "missing steps", "train.steps"),
    BadConfigCase("missing checkpoint", "missing checkpoint", "paths.checkpoint"),
    BadConfigCase("unknown field", "unknown field", "model.depth"),
    BadConfigCase("unknown section", "unknown section", "optimizer"),
    BadConfigCase("derived vocab", "derived vocab", "data.vocab"),
    BadConfigCase("bool for int", "bool for int", "model.d"),
    BadConfigCase("string for float", "string for float", "train.lr"),
    BadConfigCase("bad enum", "bad enum", "model.ablation"),
    BadConfigCase("lambda out of range", "lambda out of range", "train"),
    BadConfigCase("heads do not divide", "heads do not divide", "model"),
    BadConfigCase("caption too long", "caption too long", "data.T"),
    BadConfigCase("empty sigmas", "empty sigmas", "eval"),
]


@pytest.mark.unit
@pytest.mark.parametrize("case", BAD_CONFIG_CASES, ids=lambda c: c.name)
def test_invalid_configs_name_the_field(tmp_path, case):
    with pytest.raises(ConfigError) as info:
        ExperimentConfig.from_dict(_mutated(tmp_path, case.mutate))

    assert info.value.field == case.field
    assert info.value.exit_code == 3


@pytest.mark.unit
def test_invalid_json_reports_the_line(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{\n  "train": {\n    "steps": ,\n  }\n}\n')

    with pytest.raises(ConfigError) as info:
        load_config(path)

    assert info.value.line == 3


@pytest.mark.unit
def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")


@pytest.mark.unit
def test_overrides_are_applied_and_recorded(config_file):
    config = load_config(config_file)

    updated = apply_overrides(config, steps=7, lr=None, seed=11, **{"lambda": 0.25})

    assert updated.train.steps == 7
    assert updated.train.seed == 11
    assert updated.train.lam == 0.25
    assert updated.train.lr == config.train.lr
    assert updated.overrides == {"train.steps": 7, "train.seed": 11, "train.lambda": 0.25}
    assert apply_overrides(config, steps=None) is config


@pytest.mark.unit
def test_invalid_override_is_a_config_error(config_file):
    with pytest.raises(ConfigError):
        apply_overrides(load_config(config_file), steps=0)


@pytest.mark.unit
def test_to_dict_round_trip(config_file):
    config = load_config(config_file)

    again = ExperimentConfig.from_dict(json.loads(json.dumps(config.to_dict())))

    assert again == config
    assert "vocab" not in config.to_dict()["data"]
    assert config.to_dict()["train"]["lambda"] == config.train.lam


@pytest.mark.unit
def test_config_hash_tracks_the_model_section():
    base = LvlmConfig.micro()

    assert config_hash(base) == config_hash(LvlmConfig.micro())
    assert len(config_hash(base)) == 64
    assert config_hash(base) != config_hash(replace(base, n=3))
    assert config_hash(base) != config_hash(replace(base, ablation=Ablation.NO_VISUAL))
