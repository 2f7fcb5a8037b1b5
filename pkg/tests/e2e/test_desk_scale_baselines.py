"""End-to-end regression baselines on the reference synthetic task.

Each test trains real models for hundreds of steps over five seeds and
compares medians. Thresholds are the recorded baselines for the
reference task; a failure here means training quality regressed.
"""

from dataclasses import dataclass, replace

import numpy as np
import pytest

from ssmi_lab.core.data import Dataset, chance_level, generate
from ssmi_lab.core.evaluation import evaluate_split, recon_mse, run_ablations, run_robustness, token_accuracy
from ssmi_lab.core.lvlm import LvlmModel
from ssmi_lab.core.models import Ablation, DatasetSpec, LvlmConfig, SsmInit, Stage, TrainConfig
from ssmi_lab.core.training import run_stage1, run_stage2, warm_start_backbone

SEEDS = (0, 1, 2, 3, 4)
STAGE1 = TrainConfig(stage=Stage.PRETRAIN, steps=500, batch_size=8, lr=0.01, log_every=100, warmup_steps=300)
STAGE2 = TrainConfig(stage=Stage.FINETUNE, steps=1000, batch_size=8, lr=0.01, log_every=100)


@dataclass
class SeedRun:
    seed: int
    untrained_recon: float
    stage1_first: float
    stage1_last: float
    pretrained_recon: float
    accuracy: float
    model: LvlmModel


@pytest.fixture(scope="module")
def task() -> tuple[LvlmConfig, Dataset]:
    config = LvlmConfig.reference_task()
    dataset = generate(DatasetSpec(size=400, d_raw=config.d_raw, T=6, vocab=config.vocab, seed=0))
    return config, dataset


@pytest.fixture(scope="module")
def runs(task) -> list[SeedRun]:
    config, dataset = task
    results = []
    for seed in SEEDS:
        model = LvlmModel.build(config, seed)
        stage1 = replace(STAGE1, seed=seed)
        warm_start_backbone(model, dataset, stage1)
        untrained = recon_mse(model, dataset.held_out)
        log = run_stage1(model, dataset, stage1)
        totals = [b.total for b in log.breakdowns]
        pretrained = recon_mse(model, dataset.held_out)
        run_stage2(model, dataset, replace(STAGE2, seed=seed))
        results.append(
            SeedRun(
                seed=seed,
                untrained_recon=untrained,
                stage1_first=float(np.mean(totals[:10])),
                stage1_last=float(np.mean(totals[-10:])),
                pretrained_recon=pretrained,
                accuracy=token_accuracy(model, dataset.held_out),
                model=model,
            )
        )
    return results


@pytest.mark.e2e
def test_stage1_halves_reconstruction(runs):
    ratios = [r.stage1_last / r.stage1_first for r in runs]

    assert float(np.median(ratios)) <= 0.5, ratios


@pytest.mark.e2e
def test_stage2_reaches_held_out_accuracy(runs):
    accuracies = [r.accuracy for r in runs]

    assert float(np.median(accuracies)) >= 0.95, accuracies


@pytest.mark.e2e
def test_pretraining_beats_untrained_reconstruction(runs):
    gains = [r.untrained_recon - r.pretrained_recon for r in runs]

    assert float(np.median(gains)) > 0.0, gains


@pytest.mark.e2e
def test_heavy_noise_drops_accuracy_to_chance(runs, task):
    _, dataset = task
    chance = chance_level(dataset.held_out)
    model = runs[0].model

    report = run_robustness(model, dataset, [0.0, 10.0], seeds=SEEDS)

    assert report.rows[0].degradation == 0.0
    assert abs(report.row("none", 10.0, "finetune_ssm").token_accuracy - chance) <= 0.1


@pytest.mark.e2e
def test_ablation_ordering(runs, task):
    config, dataset = task
    init_state = runs[0].model.state_dict()

    report = run_ablations(config, dataset, SEEDS, STAGE2, init_state=init_state)

    full, static, blind = (report.row(a.value, 0.0, "finetune_ssm").token_accuracy for a in Ablation)
    assert full >= static >= blind
    assert full - blind >= 0.3
    assert blind <= chance_level(dataset.held_out) + 0.1


@pytest.mark.e2e
def test_frozen_tensors_survive_a_thousand_steps():
    config = replace(LvlmConfig.micro(), ssm_init=SsmInit.RANDOM)
    dataset = generate(DatasetSpec(size=20, d_raw=config.d_raw, T=4, vocab=config.vocab, seed=1))
    model = LvlmModel.build(config, seed=0)
    before = model.state_dict()

    run_stage2(model, dataset, TrainConfig(stage=Stage.FINETUNE, steps=1000, batch_size=4, lr=0.01, log_every=250))

    after = model.state_dict()
    for name, array in before.items():
        if ".ssm." not in name:
            assert after[name].tobytes() == array.tobytes(), name
    assert evaluate_split(model, dataset.held_out).recon_mse >= 0.0
