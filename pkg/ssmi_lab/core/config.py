"""Experiment configuration files for ssmi-lab.

A config is a JSON object with the sections ``model``, ``train``, ``data``,
``eval`` and ``paths``. Every field has a default in ``constants.py`` except
``train.steps`` and the three ``paths`` entries, which are required. The
dataset's ``d_raw`` and ``vocab`` always follow the ``model`` section.
"""

import hashlib
import json
import types
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any, Union, get_args, get_origin, get_type_hints

from .constants import DEFAULT_BLEU_ORDER, DEFAULT_EVAL_SEEDS, DEFAULT_SIGMAS, DEFAULT_TRAINING_LOG
from .errors import ConfigError, ContractError
from .models import DatasetSpec, LvlmConfig, TrainConfig

# JSON key -> dataclass attribute where the two differ
_RENAMES = {"train": {"lambda": "lam"}}
_DERIVED_DATA_FIELDS = ("d_raw", "vocab")
REQUIRED_FIELDS = ("train.steps", "paths.checkpoint", "paths.report", "paths.log")
OVERRIDABLE = {"steps": "train.steps", "lr": "train.lr", "lambda": "train.lambda", "seed": "train.seed"}


@dataclass(frozen=True)
class EvalConfig:
    """Noise levels and seeds for the evaluation protocols."""

    sigmas: tuple[float, ...] = DEFAULT_SIGMAS
    seeds: tuple[int, ...] = DEFAULT_EVAL_SEEDS
    bleu_order: int = DEFAULT_BLEU_ORDER

    def validate(self) -> None:
        if not self.sigmas or any(s < 0 for s in self.sigmas):
            raise ContractError("sigmas must be a nonempty list of values >= 0")
        if not self.seeds:
            raise ContractError("seeds must be nonempty")
        if self.bleu_order < 1:
            raise ContractError("bleu_order must be >= 1")


@dataclass(frozen=True)
class PathsConfig:
    """Output locations; ``dataset`` is optional and enables dataset export."""

    checkpoint: str
    report: str
    log: str
    training_log: str = DEFAULT_TRAINING_LOG
    dataset: str = ""

    def validate(self) -> None:
        for name in ("checkpoint", "report", "log", "training_log"):
            if not getattr(self, name):
                raise ContractError(f"{name} must be a nonempty path")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one command needs."""

    paths: PathsConfig
    model: LvlmConfig = field(default_factory=LvlmConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    data: DatasetSpec = field(default_factory=DatasetSpec)
    eval: EvalConfig = field(default_factory=EvalConfig)
    overrides: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        """Check every section; failures become ConfigError naming the section."""
        for section in ("model", "train", "data", "eval", "paths"):
            try:
                getattr(self, section).validate()
            except ContractError as exc:
                raise ConfigError(str(exc), field=section) from exc
        if self.data.T - 1 > self.model.max_T:
            raise ConfigError(f"caption length {self.data.T} needs max_T >= {self.data.T - 1}", field="data.T")

    def config_hash(self) -> str:
        return config_hash(self.model)

    def to_dict(self) -> dict[str, Any]:
        data = _section_to_dict(self.data)
        for name in _DERIVED_DATA_FIELDS:
            data.pop(name)
        return {
            "model": _section_to_dict(self.model),
            "train": _section_to_dict(self.train, _RENAMES["train"]),
            "data": data,
            "eval": _section_to_dict(self.eval),
            "paths": _section_to_dict(self.paths),
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "ExperimentConfig":
        """Build and validate a config from a parsed JSON object.

        Raises:
            ConfigError: On unknown sections or fields, wrong types, missing
                required fields or values outside their ranges.
        """
        if not isinstance(raw, dict):
            raise ConfigError("top level must be a JSON object")
        for section in raw:
            if section not in ("model", "train", "data", "eval", "paths"):
                raise ConfigError("unknown section", field=section)
        for dotted in REQUIRED_FIELDS:
            section, name = dotted.split(".")
            if name not in raw.get(section, {}):
                raise ConfigError("missing required field", field=dotted)
        model = _parse_section(LvlmConfig, "model", raw.get("model", {}))
        data_raw = dict(raw.get("data", {}))
        for name in _DERIVED_DATA_FIELDS:
            if name in data_raw:
                raise ConfigError("derived from the model section; remove it", field=f"data.{name}")
            data_raw[name] = getattr(model, name)
        config = cls(
            model=model,
            train=_parse_section(TrainConfig, "train", raw["train"]),
            data=_parse_section(DatasetSpec, "data", data_raw),
            eval=_parse_section(EvalConfig, "eval", raw.get("eval", {})),
            paths=_parse_section(PathsConfig, "paths", raw["paths"]),
        )
        config.validate()
        return config


def load_config(path: str | Path) -> ExperimentConfig:
    """Read and validate a JSON experiment config.

    Raises:
        ConfigError: If the file is missing, not valid JSON, or fails validation.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg} (column {exc.colno})", line=exc.lineno) from exc
    return ExperimentConfig.from_dict(raw)


def apply_overrides(config: ExperimentConfig, **flags: Any) -> ExperimentConfig:
    """Replace train fields from CLI flags; ``None`` values are ignored.

    Every applied flag is recorded under its dotted config path.
    """
    applied = {OVERRIDABLE[k]: v for k, v in flags.items() if v is not None}
    if not applied:
        return config
    train_raw = _section_to_dict(config.train, _RENAMES["train"])
    for dotted, value in applied.items():
        train_raw[dotted.split(".")[1]] = value
    train = _parse_section(TrainConfig, "train", train_raw)
    updated = replace(config, train=train, overrides={**config.overrides, **applied})
    updated.validate()
    return updated


def config_hash(model: LvlmConfig) -> str:
    """SHA-256 of the canonical JSON of a model section."""
    canonical = json.dumps(_section_to_dict(model), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def lvlm_config_to_dict(model: LvlmConfig) -> dict[str, Any]:
    return _section_to_dict(model)


def lvlm_config_from_dict(raw: dict[str, Any]) -> LvlmConfig:
    return _parse_section(LvlmConfig, "model", raw)


def _section_to_dict(section: Any, renames: dict[str, str] | None = None) -> dict[str, Any]:
    back = {attr: key for key, attr in (renames or {}).items()}
    out: dict[str, Any] = {}
    for f in fields(section):
        value = getattr(section, f.name)
        if isinstance(value, Enum):
            value = value.value
        elif isinstance(value, tuple):
            value = list(value)
        out[back.get(f.name, f.name)] = value
    return out


def _parse_section(cls: Any, section: str, raw: Any) -> Any:
    if not isinstance(raw, dict):
        raise ConfigError("section must be a JSON object", field=section)
    renames = _RENAMES.get(section, {})
    hints = get_type_hints(cls)
    known = {f.name for f in fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        attr = renames.get(key, key)
        if attr not in known or attr == "overrides":
            raise ConfigError("unknown field", field=f"{section}.{key}")
        kwargs[attr] = _coerce(value, hints[attr], f"{section}.{key}")
    try:
        return cls(**kwargs)
    except ContractError as exc:
        raise ConfigError(str(exc), field=section) from exc


def _coerce(value: Any, hint: Any, where: str) -> Any:
    origin = get_origin(hint)
    if origin in (Union, types.UnionType):
        hint = next(a for a in get_args(hint) if a is not type(None))
        origin = get_origin(hint)
    if origin is tuple:
        if not isinstance(value, list):
            raise ConfigError("expected a list", field=where)
        item = get_args(hint)[0]
        return tuple(_coerce(v, item, where) for v in value)
    if isinstance(hint, type) and issubclass(hint, Enum):
        try:
            return hint(value)
        except ValueError as exc:
            allowed = ", ".join(m.value for m in hint)
            raise ConfigError(f"expected one of {allowed}, got {value!r}", field=where) from exc
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", field=where)
        return value
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, int | float):
            raise ConfigError(f"expected a number, got {value!r}", field=where)
        return float(value)
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", field=where)
        return value
    return value
