"""Finetune command for ssmi-lab."""

import click

from ..core.experiment import finetune as run_finetune
from ..core.logging_config import get_run_logger
from .common import load_experiment, reported_errors, training_overrides


@click.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option(
    "--init", "init", required=True, type=click.Path(dir_okay=False), help="Pretrain checkpoint to start from"
)
@training_overrides(with_lambda=True)
def finetune(
    config: str,
    init: str,
    steps: int | None,
    lr: float | None,
    lam: float | None,
    seed: int | None,
) -> None:
    """Stage 2: train the memory modules on the combined objective."""
    with reported_errors():
        experiment = load_experiment(config, steps=steps, lr=lr, lam=lam, seed=seed)
        result = run_finetune(experiment, init, get_run_logger(experiment.paths.log))
    final = result.log.rows[-1].breakdown
    click.echo(
        f"Finetuned {experiment.train.steps} steps: total={final.total:.6f} "
        f"(pretrain={final.pretrain_term:.6f}, task={final.task_term:.6f})"
    )
    click.echo(f"Checkpoint: {experiment.paths.checkpoint}")
