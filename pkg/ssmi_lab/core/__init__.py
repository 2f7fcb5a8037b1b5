"""Core library for ssmi-lab."""

from .config import EvalConfig, ExperimentConfig, PathsConfig, load_config
from .errors import SsmiError
from .lvlm import LvlmModel
from .models import EvalMode, FreezeMode, LvlmConfig, Stage, TrainConfig

__all__ = [
    "EvalConfig",
    "EvalMode",
    "ExperimentConfig",
    "FreezeMode",
    "LvlmConfig",
    "LvlmModel",
    "PathsConfig",
    "SsmiError",
    "Stage",
    "TrainConfig",
    "load_config",
]
