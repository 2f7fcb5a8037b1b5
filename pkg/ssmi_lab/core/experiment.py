"""Command orchestration: pretrain, finetune and evaluate from a config.

Checkpoints carry the full experiment config under ``metadata["experiment"]``
so that ``eval`` can rebuild the dataset without a config file.
"""

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

from .checkpoint import Checkpoint, check_compatible, load_checkpoint, restore_model, save_checkpoint
from .config import ExperimentConfig
from .data import Dataset, generate, save_dataset
from .errors import CheckpointFormatError, ConfigError, StageError
from .evaluation import efficiency_report, evaluate_standard, run_ablations, run_robustness, run_zero_shot
from .lvlm import LvlmModel
from .models import EvalMode, Stage
from .report import EvalReport, write_report
from .training import TrainingLog, run_stage1, run_stage2, warm_start_backbone

logger = logging.getLogger(__name__)


@dataclass
class StageResult:
    model: LvlmModel
    log: TrainingLog
    checkpoint: bytes


def prepare_dataset(config: ExperimentConfig) -> Dataset:
    """Generate the configured dataset, exporting it when ``paths.dataset`` is set."""
    dataset = generate(config.data)
    if config.paths.dataset:
        save_dataset(dataset, config.paths.dataset)
        logger.info(f"Exported dataset to {config.paths.dataset}")
    return dataset


def _metadata(config: ExperimentConfig, stage: Stage, step: int) -> dict[str, Any]:
    return {
        "stage": stage.value,
        "step": step,
        "seed": config.train.seed,
        "lambda": config.train.lam,
        "overrides": dict(sorted(config.overrides.items())),
        "experiment": config.to_dict(),
    }


def initial_model(
    config: ExperimentConfig, dataset: Dataset, run_logger: logging.Logger | None = None
) -> tuple[LvlmModel, TrainingLog]:
    """The model pretraining starts from, with the log of its warm start.

    A nonzero ``train.warmup_steps`` first trains the whole backbone on the
    task loss so the frozen embeddings carry signal. The result depends only
    on the config and the dataset.
    """
    train = replace(config.train, stage=Stage.PRETRAIN)
    model = LvlmModel.build(config.model, train.seed)
    log = TrainingLog(stage=Stage.PRETRAIN)
    if train.warmup_steps > 0:
        log.rows.extend(warm_start_backbone(model, dataset, train, run_logger).rows)
    return model, log


def pretrain(config: ExperimentConfig, run_logger: logging.Logger | None = None) -> StageResult:
    """Build the initial model and run reconstruction pretraining."""
    train = replace(config.train, stage=Stage.PRETRAIN)
    dataset = prepare_dataset(config)
    model, combined = initial_model(config, dataset, run_logger)
    combined.rows.extend(run_stage1(model, dataset, train, run_logger).rows)
    combined.write(config.paths.training_log)
    blob = save_checkpoint(model, _metadata(config, Stage.PRETRAIN, train.steps), config.paths.checkpoint)
    return StageResult(model=model, log=combined, checkpoint=blob)


def finetune(
    config: ExperimentConfig, init: str | Path, run_logger: logging.Logger | None = None
) -> StageResult:
    """Continue from a pretrain checkpoint with the combined objective.

    Raises:
        StageError: If the init checkpoint is not a pretrain checkpoint.
        CompatibilityError: If its model section differs from the config.
    """
    checkpoint = load_checkpoint(init)
    if checkpoint.stage is not Stage.PRETRAIN:
        raise StageError(f"finetune needs a pretrain checkpoint, {init} is at stage {checkpoint.stage.value}")
    check_compatible(checkpoint, config.model)
    model = restore_model(checkpoint)
    train = replace(config.train, stage=Stage.FINETUNE)
    dataset = prepare_dataset(config)
    log = run_stage2(model, dataset, train, run_logger)
    log.write(config.paths.training_log)
    step = int(checkpoint.metadata.get("step", 0)) + train.steps
    blob = save_checkpoint(model, _metadata(config, Stage.FINETUNE, step), config.paths.checkpoint)
    return StageResult(model=model, log=log, checkpoint=blob)


def experiment_of(checkpoint: Checkpoint, config: ExperimentConfig | None = None) -> ExperimentConfig:
    """The experiment a checkpoint belongs to.

    An explicit ``config`` wins but must describe the same model; otherwise
    the copy stored in the checkpoint metadata is used.
    """
    if config is not None:
        check_compatible(checkpoint, config.model)
        return config
    stored = checkpoint.metadata.get("experiment")
    if not isinstance(stored, dict):
        raise CheckpointFormatError("metadata lacks the experiment config; pass --config")
    try:
        return ExperimentConfig.from_dict(stored)
    except ConfigError as exc:
        raise CheckpointFormatError(f"stored experiment config is invalid: {exc}") from exc


def evaluate(
    checkpoint_path: str | Path,
    mode: EvalMode,
    config: ExperimentConfig | None = None,
    report_path: str | Path | None = None,
) -> EvalReport:
    """Run one evaluation protocol against a checkpoint and write its report."""
    checkpoint = load_checkpoint(checkpoint_path)
    experiment = experiment_of(checkpoint, config)
    model = restore_model(checkpoint)
    dataset = generate(experiment.data)
    settings = experiment.eval
    logger.info(f"Evaluating {checkpoint_path} (stage={checkpoint.stage.value}, mode={mode.value})")

    if mode is EvalMode.STANDARD:
        report = evaluate_standard(model, dataset, settings)
    elif mode is EvalMode.ABLATE:
        report = run_ablations(
            model.config,
            dataset,
            settings.seeds,
            replace(experiment.train, stage=Stage.FINETUNE),
            init_state=checkpoint.tensors,
            bleu_order=settings.bleu_order,
        )
    elif mode is EvalMode.ROBUSTNESS:
        report = run_robustness(model, dataset, settings.sigmas, settings.seeds, settings.bleu_order)
    elif mode is EvalMode.ZERO_SHOT:
        baseline, _ = initial_model(experiment, dataset)
        report = run_zero_shot(model, dataset, checkpoint.stage, baseline, settings.bleu_order)
    else:
        report = efficiency_report(model, dataset, settings)

    report.info["config_hash"] = checkpoint.config_hash
    report.info["stage"] = checkpoint.stage.value
    report.info["step"] = str(checkpoint.metadata.get("step", 0))
    overrides = checkpoint.metadata.get("overrides")
    if overrides:
        report.info["overrides"] = json.dumps(overrides, sort_keys=True, separators=(",", ":"))
    write_report(report, report_path or experiment.paths.report)
    return report
