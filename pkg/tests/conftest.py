"""Shared test fixtures and configuration."""

import json
from pathlib import Path
from typing import Any

import numpy as np
import pytest

from ssmi_lab.core.data import Dataset, generate
from ssmi_lab.core.lvlm import LvlmModel
from ssmi_lab.core.models import DatasetSpec, LvlmConfig, SsmInit
from ssmi_lab.core.ssm import SsmParams


def random_ssm(rng: np.random.Generator, n: int, d: int, d_v: int = 2, radius: float = 0.8) -> SsmParams:
    """Random system with a symmetric A of exactly the given spectral radius."""
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    eigenvalues = radius * rng.uniform(-1.0, 1.0, size=n)
    eigenvalues[0] = radius
    A = (q * eigenvalues) @ q.T
    arrays = {
        "A": A,
        "B": rng.normal(size=(n, d)),
        "C": rng.normal(size=(d, n)),
        "D": rng.normal(size=(d, d)),
        "W_v": rng.normal(size=(d, d_v)),
    }
    return SsmParams.from_arrays(arrays)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def micro_config() -> LvlmConfig:
    """Micro model with random (nonzero) readouts so every path carries gradient."""
    return LvlmConfig(L=1, d=4, n_heads=1, n=2, vocab=5, d_v=3, d_raw=3, max_T=4, ssm_init=SsmInit.RANDOM)


@pytest.fixture
def micro_model(micro_config: LvlmConfig) -> LvlmModel:
    return LvlmModel.build(micro_config, seed=3)


@pytest.fixture
def micro_dataset(micro_config: LvlmConfig) -> Dataset:
    return generate(DatasetSpec(size=12, d_raw=micro_config.d_raw, T=4, vocab=micro_config.vocab, seed=5))


@pytest.fixture
def task_config() -> LvlmConfig:
    return LvlmConfig.reference_task()


@pytest.fixture
def task_dataset(task_config: LvlmConfig) -> Dataset:
    return generate(DatasetSpec(size=40, d_raw=task_config.d_raw, T=6, vocab=task_config.vocab, seed=0))


def experiment_dict(root: Path, **train: Any) -> dict[str, Any]:
    """A small, fast experiment config rooted at ``root``."""
    return {
        "model": {"L": 1, "d": 8, "n_heads": 2, "n": 2, "vocab": 4, "d_v": 4, "d_raw": 4, "max_T": 6},
        "train": {"steps": 3, "batch_size": 4, "lr": 0.01, "log_every": 1, **train},
        "data": {"size": 10, "T": 4, "seed": 1},
        "eval": {"sigmas": [0.0, 1.0], "seeds": [0, 1]},
        "paths": {
            "checkpoint": str(root / "model.ssmi"),
            "report": str(root / "report.txt"),
            "log": str(root / "run.log"),
            "training_log": str(root / "train.tsv"),
        },
    }


@pytest.fixture
def config_file(tmp_path: Path) -> Path:
    """Experiment config written to disk."""
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(experiment_dict(tmp_path), indent=2))
    return path
