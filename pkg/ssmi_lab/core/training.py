"""Two-stage training of the memory modules.

Stage 1 fits the final memory module's output to the frozen embeddings of
the target tokens (reconstruction). Stage 2 minimizes the combined objective
``lam * reconstruction + (1 - lam) * next-token cross-entropy``.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from .checkpoint import write_atomic
from .data import Dataset, SyntheticSample, endless_batches
from .errors import ContractError, NonFiniteError, TrainingDivergence
from .lvlm import LvlmModel
from .models import FreezeMode, LossBreakdown, Stage, TrainConfig
from .numerics import Adam, Tensor, add, backward, clip_grad_norm, cross_entropy, mse, mul
from .performance import PerformanceMonitor, Stopwatch

logger = logging.getLogger(__name__)

Batch = Sequence[SyntheticSample]
LossFn = Callable[[LvlmModel, Batch], tuple[Tensor, LossBreakdown]]

TRAINING_LOG_COLUMNS = ("step", "pretrain_term", "task_term", "total", "wall_ms", "rss_mb")


def sample_terms(model: LvlmModel, sample: SyntheticSample) -> tuple[Tensor, Tensor]:
    """Reconstruction and next-token terms for one caption.

    The model reads ``tokens[:-1]`` and is scored against ``tokens[1:]``.
    """
    if len(sample.tokens) < 2:
        raise ContractError("a caption needs at least two tokens")
    inputs, targets = list(sample.tokens[:-1]), list(sample.tokens[1:])
    out = model.run(inputs, Tensor(sample.raw_visual))
    task = cross_entropy(out.logits, targets)
    target_embeddings = Tensor(model.params["token_embedding"].data[targets])
    return mse(out.ssm_output, target_embeddings), task


def _batch_terms(model: LvlmModel, batch: Batch) -> tuple[Tensor, Tensor]:
    if not batch:
        raise ContractError("empty batch")
    terms = [sample_terms(model, sample) for sample in batch]
    recon, task = terms[0]
    for r, t in terms[1:]:
        recon = add(recon, r)
        task = add(task, t)
    scale = 1.0 / len(batch)
    return mul(recon, scale), mul(task, scale)


def pretrain_loss(model: LvlmModel, batch: Batch) -> tuple[Tensor, LossBreakdown]:
    """Mean reconstruction loss over the batch."""
    recon, task = _batch_terms(model, batch)
    value = recon.item()
    return recon, LossBreakdown(pretrain_term=value, task_term=task.item(), total=value)


def task_loss(model: LvlmModel, batch: Batch) -> tuple[Tensor, LossBreakdown]:
    """Mean next-token cross-entropy over the batch."""
    recon, task = _batch_terms(model, batch)
    value = task.item()
    return task, LossBreakdown(pretrain_term=recon.item(), task_term=value, total=value)


def total_loss(model: LvlmModel, batch: Batch, lam: float) -> tuple[Tensor, LossBreakdown]:
    """Convex combination ``lam * pretrain + (1 - lam) * task``.

    Raises:
        ContractError: If ``lam`` is outside [0, 1].
    """
    if not 0.0 <= lam <= 1.0:
        raise ContractError(f"lambda must lie in [0, 1], got {lam}")
    recon, task = _batch_terms(model, batch)
    total = add(mul(recon, lam), mul(task, 1.0 - lam))
    return total, LossBreakdown(
        pretrain_term=recon.item(), task_term=task.item(), total=total.item()
    )


@dataclass
class LogRow:
    breakdown: LossBreakdown
    wall_ms: float
    rss_mb: float

    def to_tsv(self) -> str:
        b = self.breakdown
        return (
            f"{b.step}\t{b.pretrain_term!r}\t{b.task_term!r}\t{b.total!r}"
            f"\t{self.wall_ms:.3f}\t{self.rss_mb:.1f}"
        )


@dataclass
class TrainingLog:
    """Per-step records of one stage.

    Rendered as tab-separated text with the header ``TRAINING_LOG_COLUMNS``.
    Loss columns use the shortest round-trip float form; ``wall_ms`` and
    ``rss_mb`` are the only columns that vary between identical runs.
    """

    stage: Stage
    rows: list[LogRow] = field(default_factory=list)

    @property
    def breakdowns(self) -> list[LossBreakdown]:
        return [row.breakdown for row in self.rows]

    def to_tsv(self) -> str:
        lines = ["\t".join(TRAINING_LOG_COLUMNS)]
        lines.extend(row.to_tsv() for row in self.rows)
        return "\n".join(lines) + "\n"

    def write(self, path: str | Path) -> None:
        write_atomic(path, self.to_tsv().encode("utf-8"))


def _train(
    model: LvlmModel,
    samples: Sequence[SyntheticSample],
    config: TrainConfig,
    mode: FreezeMode,
    steps: int,
    loss_fn: LossFn,
    stage: Stage,
    run_logger: logging.Logger | None,
) -> TrainingLog:
    log = run_logger or logger
    if not samples:
        raise ContractError("training split is empty")
    model.set_freeze_mode(mode)
    params = model.trainable_tensors()
    optimizer = Adam(params, lr=config.lr)
    stream = endless_batches(samples, config.batch_size, config.seed)
    monitor = PerformanceMonitor()
    history = TrainingLog(stage=stage)
    log.info(
        f"{stage.value}: {steps} steps, mode={mode.value}, "
        f"trainable_ratio={model.trainable_ratio():.6f}"
    )
    for step in range(1, steps + 1):
        watch = Stopwatch()
        optimizer.zero_grad()
        try:
            loss, breakdown = loss_fn(model, next(stream))
        except NonFiniteError as exc:
            log.error(f"Divergence at step {step}: {exc}")
            raise TrainingDivergence(step, str(exc)) from exc
        if not math.isfinite(breakdown.total):
            log.error(f"Divergence at step {step}: loss {breakdown.total}")
            raise TrainingDivergence(step, f"loss {breakdown.total}")
        backward(loss)
        clip_grad_norm(params, config.grad_clip)
        optimizer.step()
        model.enforce_ssm_stability()
        breakdown = LossBreakdown(
            pretrain_term=breakdown.pretrain_term,
            task_term=breakdown.task_term,
            total=breakdown.total,
            step=step,
        )
        history.rows.append(LogRow(breakdown, watch.lap(), monitor.rss_mb()))
        if step % config.log_every == 0 or step == steps:
            log.info(
                f"{stage.value} step {step}/{steps}: total={breakdown.total:.6f} "
                f"pretrain={breakdown.pretrain_term:.6f} task={breakdown.task_term:.6f}"
            )
    return history


def run_stage1(
    model: LvlmModel,
    dataset: Dataset,
    config: TrainConfig,
    run_logger: logging.Logger | None = None,
) -> TrainingLog:
    """Reconstruction pretraining of the memory modules only."""
    config.validate()
    if config.stage is not Stage.PRETRAIN:
        raise ContractError(f"run_stage1 needs stage=pretrain, got {config.stage.value}")
    return _train(
        model, dataset.train, config, FreezeMode.PRETRAIN_SSM, config.steps,
        pretrain_loss, Stage.PRETRAIN, run_logger,
    )


def run_stage2(
    model: LvlmModel,
    dataset: Dataset,
    config: TrainConfig,
    run_logger: logging.Logger | None = None,
) -> TrainingLog:
    """Task fine-tuning of the memory modules on the combined objective."""
    config.validate()
    if config.stage is not Stage.FINETUNE:
        raise ContractError(f"run_stage2 needs stage=finetune, got {config.stage.value}")
    lam = config.lam

    def objective(m: LvlmModel, batch: Batch) -> tuple[Tensor, LossBreakdown]:
        return total_loss(m, batch, lam)

    return _train(
        model, dataset.train, config, FreezeMode.FINETUNE_SSM, config.steps,
        objective, Stage.FINETUNE, run_logger,
    )


def warm_start_backbone(
    model: LvlmModel,
    dataset: Dataset,
    config: TrainConfig,
    run_logger: logging.Logger | None = None,
) -> TrainingLog:
    """Full fine-tuning on the task loss for ``config.warmup_steps`` steps.

    Leaves the model in ``FreezeMode.FULL``; callers switch modes afterwards.
    """
    config.validate()
    if config.warmup_steps < 1:
        raise ContractError("warm start needs warmup_steps >= 1")
    return _train(
        model, dataset.train, config, FreezeMode.FULL, config.warmup_steps,
        task_loss, Stage.INIT, run_logger,
    )
