"""Metrics and evaluation protocols.

Cross-seed aggregation is always the median. Every protocol evaluates the
held-out split.
"""

import collections
import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, replace

import numpy as np

from .config import EvalConfig
from .constants import DEFAULT_BLEU_ORDER
from .data import Dataset, SyntheticSample, add_noise_all, chance_level
from .errors import ContractError, StageError
from .lvlm import LvlmModel
from .models import Ablation, EvalMode, FreezeMode, LvlmConfig, Stage, TrainConfig
from .numerics import Tensor, no_grad
from .report import EvalReport, EvalRow
from .rng import derive_seed
from .training import run_stage2, sample_terms

logger = logging.getLogger(__name__)

ABLATION_ORDER = (Ablation.NONE, Ablation.NO_STATE_DYNAMICS, Ablation.NO_VISUAL)
_NOISE_STREAM = 7


@dataclass(frozen=True)
class SplitMetrics:
    token_accuracy: float
    bleu4: float
    recon_mse: float


def _require_samples(samples: Sequence[SyntheticSample]) -> None:
    if not samples:
        raise ContractError("evaluation split is empty")


def token_accuracy(model: LvlmModel, samples: Sequence[SyntheticSample]) -> float:
    """Fraction of next-token argmax predictions equal to the targets."""
    _require_samples(samples)
    correct = total = 0
    for sample in samples:
        predicted = model.predict(list(sample.tokens[:-1]), Tensor(sample.raw_visual))
        targets = np.asarray(sample.tokens[1:])
        correct += int((predicted == targets).sum())
        total += targets.size
    return correct / total


def _ngrams(sequence: Sequence[int], order: int) -> collections.Counter[tuple[int, ...]]:
    return collections.Counter(
        tuple(sequence[i : i + order]) for i in range(len(sequence) - order + 1)
    )


def bleu_n(candidate: Sequence[int], reference: Sequence[int], n: int = DEFAULT_BLEU_ORDER) -> float:
    """Single-reference sentence BLEU over orders 1..n.

    A zero modified precision at order k is replaced by ``1 / (2 * c_k)``
    where ``c_k`` is the number of candidate k-grams. Orders longer than the
    candidate have no k-grams and are left out of the geometric mean. The
    brevity penalty is 1 when the candidate is longer than the reference,
    else ``exp(1 - r / c)``. An empty candidate scores 0.
    """
    if n < 1:
        raise ContractError(f"BLEU order must be >= 1, got {n}")
    c, r = len(candidate), len(reference)
    if c == 0:
        return 0.0
    log_precisions = []
    for order in range(1, n + 1):
        cand = _ngrams(candidate, order)
        count = sum(cand.values())
        if count == 0:
            break
        matched = sum((cand & _ngrams(reference, order)).values())
        precision = matched / count if matched else 1.0 / (2 * count)
        log_precisions.append(math.log(precision))
    brevity = 1.0 if c > r else math.exp(1.0 - r / c)
    return brevity * math.exp(sum(log_precisions) / len(log_precisions))


def caption_bleu(
    model: LvlmModel, samples: Sequence[SyntheticSample], n: int = DEFAULT_BLEU_ORDER
) -> float:
    """Mean sentence BLEU of greedy captions seeded with each true first token."""
    _require_samples(samples)
    scores = [
        bleu_n(
            model.greedy_decode(s.tokens[0], Tensor(s.raw_visual), len(s.tokens)),
            s.tokens,
            n,
        )
        for s in samples
    ]
    return float(np.mean(scores))


def recon_mse(model: LvlmModel, samples: Sequence[SyntheticSample]) -> float:
    """Mean reconstruction loss of the final memory module."""
    _require_samples(samples)
    with no_grad():
        return float(np.mean([sample_terms(model, s)[0].item() for s in samples]))


def evaluate_split(
    model: LvlmModel, samples: Sequence[SyntheticSample], bleu_order: int = DEFAULT_BLEU_ORDER
) -> SplitMetrics:
    with no_grad():
        return SplitMetrics(
            token_accuracy=token_accuracy(model, samples),
            bleu4=caption_bleu(model, samples, bleu_order),
            recon_mse=recon_mse(model, samples),
        )


def _median(values: Sequence[float]) -> float:
    return float(np.median(np.asarray(values, dtype=np.float64)))


def _row(model: LvlmModel, sigma: float, metrics: SplitMetrics, degradation: float = 0.0) -> EvalRow:
    return EvalRow(
        ablation=model.config.ablation.value,
        noise_sigma=float(sigma),
        freeze_mode=model.freeze_mode.value,
        token_accuracy=metrics.token_accuracy,
        bleu4=metrics.bleu4,
        recon_mse=metrics.recon_mse,
        degradation=degradation,
    )


def evaluate_standard(model: LvlmModel, dataset: Dataset, config: EvalConfig) -> EvalReport:
    """Clean held-out metrics plus the model's trainable ratio."""
    metrics = evaluate_split(model, dataset.held_out, config.bleu_order)
    return EvalReport(
        mode=EvalMode.STANDARD,
        token_accuracy=metrics.token_accuracy,
        bleu4=metrics.bleu4,
        trainable_ratio=model.trainable_ratio(),
        seeds=list(config.seeds),
        rows=[_row(model, 0.0, metrics)],
        info={"chance_level": repr(chance_level(dataset.held_out))},
    )


def run_ablations(
    base_config: LvlmConfig,
    dataset: Dataset,
    seeds: Sequence[int],
    train: TrainConfig,
    init_state: dict[str, np.ndarray] | None = None,
    bleu_order: int = DEFAULT_BLEU_ORDER,
) -> EvalReport:
    """Train and evaluate every ablation for every seed; report medians.

    Each run builds a model from its seed (or loads ``init_state``), then runs
    Stage 2 with ``train`` unless ``train.steps`` is 0.
    """
    if not seeds:
        raise ContractError("seeds must be nonempty")
    rows = []
    ratio = 0.0
    for ablation in ABLATION_ORDER:
        config = replace(base_config, ablation=ablation)
        per_seed = []
        for seed in seeds:
            model = LvlmModel.build(config, seed)
            if init_state is not None:
                model.load_state_dict(init_state)
            if train.steps > 0:
                run_stage2(model, dataset, replace(train, seed=seed, stage=Stage.FINETUNE))
            per_seed.append(evaluate_split(model, dataset.held_out, bleu_order))
            ratio = model.trainable_ratio()
            logger.info(
                f"ablation={ablation.value} seed={seed}: "
                f"accuracy={per_seed[-1].token_accuracy:.4f}"
            )
        rows.append(
            EvalRow(
                ablation=ablation.value,
                noise_sigma=0.0,
                freeze_mode=FreezeMode.FINETUNE_SSM.value,
                token_accuracy=_median([m.token_accuracy for m in per_seed]),
                bleu4=_median([m.bleu4 for m in per_seed]),
                recon_mse=_median([m.recon_mse for m in per_seed]),
            )
        )
    full = rows[0]
    return EvalReport(
        mode=EvalMode.ABLATE,
        token_accuracy=full.token_accuracy,
        bleu4=full.bleu4,
        trainable_ratio=ratio,
        seeds=list(seeds),
        rows=rows,
        flags={"training_steps": str(train.steps)},
        info={"chance_level": repr(chance_level(dataset.held_out))},
    )


def _monotone(values: Sequence[float]) -> bool:
    return all(b >= a for a, b in zip(values, values[1:]))


def run_robustness(
    model: LvlmModel,
    dataset: Dataset,
    sigmas: Sequence[float],
    seeds: Sequence[int],
    bleu_order: int = DEFAULT_BLEU_ORDER,
) -> EvalReport:
    """Held-out metrics under additive Gaussian noise on the raw features.

    ``degradation`` is clean accuracy minus noisy accuracy. Whether it is
    nondecreasing in sigma is reported as a flag, never enforced.
    """
    if 0.0 not in sigmas:
        raise ContractError("sigmas must include 0")
    if not seeds:
        raise ContractError("seeds must be nonempty")
    ordered = sorted(set(float(s) for s in sigmas))
    medians: dict[float, SplitMetrics] = {}
    for sigma in ordered:
        per_seed = [
            evaluate_split(model, add_noise_all(dataset.held_out, sigma, derive_seed(seed, _NOISE_STREAM)), bleu_order)
            for seed in seeds
        ]
        medians[sigma] = SplitMetrics(
            token_accuracy=_median([m.token_accuracy for m in per_seed]),
            bleu4=_median([m.bleu4 for m in per_seed]),
            recon_mse=_median([m.recon_mse for m in per_seed]),
        )
    clean = medians[0.0]
    rows = [
        _row(model, sigma, medians[sigma], clean.token_accuracy - medians[sigma].token_accuracy)
        for sigma in ordered
    ]
    monotone = _monotone([r.degradation for r in rows])
    if not monotone:
        logger.info("Degradation is not monotone in sigma")
    return EvalReport(
        mode=EvalMode.ROBUSTNESS,
        token_accuracy=clean.token_accuracy,
        bleu4=clean.bleu4,
        trainable_ratio=model.trainable_ratio(),
        seeds=list(seeds),
        rows=rows,
        flags={"degradation_monotone": "true" if monotone else "false"},
        info={"chance_level": repr(chance_level(dataset.held_out))},
    )


def run_zero_shot(
    model: LvlmModel,
    dataset: Dataset,
    stage: Stage,
    baseline: LvlmModel | None = None,
    bleu_order: int = DEFAULT_BLEU_ORDER,
) -> EvalReport:
    """Evaluate a model that never saw Stage 2, with every tensor frozen.

    Raises:
        StageError: If ``stage`` is finetune.
    """
    if stage is Stage.FINETUNE:
        raise StageError("zero-shot evaluation needs a checkpoint that never ran stage 2")
    model.set_freeze_mode(FreezeMode.FROZEN)
    metrics = evaluate_split(model, dataset.held_out, bleu_order)
    info = {"chance_level": repr(chance_level(dataset.held_out))}
    if baseline is not None:
        info["untrained_recon_mse"] = repr(recon_mse(baseline, dataset.held_out))
    return EvalReport(
        mode=EvalMode.ZERO_SHOT,
        token_accuracy=metrics.token_accuracy,
        bleu4=metrics.bleu4,
        trainable_ratio=model.trainable_ratio(),
        seeds=[],
        rows=[_row(model, 0.0, metrics)],
        flags={"stage": "pretrain_only" if stage is Stage.PRETRAIN else "untrained"},
        info=info,
    )


def efficiency_report(model: LvlmModel, dataset: Dataset, config: EvalConfig) -> EvalReport:
    """Standard metrics plus the trainable ratio of every freeze mode and a census."""
    report = evaluate_standard(model, dataset, config)
    original = model.freeze_mode
    ratios = {}
    for mode in FreezeMode:
        model.set_freeze_mode(mode)
        ratios[mode.value] = model.trainable_ratio()
    model.set_freeze_mode(original)
    census = model.parameter_census()
    report.mode = EvalMode.EFFICIENCY
    report.info.update({f"ratio.{k}": repr(v) for k, v in ratios.items()})
    report.info.update({f"census.{k}": str(v) for k, v in census.groups.items()})
    report.info["census.total"] = str(census.total)
    report.info["census.trainable"] = str(census.trainable)
    return report
