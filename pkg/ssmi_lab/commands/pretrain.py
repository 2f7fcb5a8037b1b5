"""Pretrain command for ssmi-lab."""

import click

from ..core.experiment import pretrain as run_pretrain
from ..core.logging_config import get_run_logger
from .common import load_experiment, reported_errors, training_overrides


@click.command()
@click.argument("config", type=click.Path(dir_okay=False))
@training_overrides(with_lambda=False)
def pretrain(config: str, steps: int | None, lr: float | None, seed: int | None) -> None:
    """Stage 1: fit the memory modules to the frozen embeddings."""
    with reported_errors():
        experiment = load_experiment(config, steps=steps, lr=lr, seed=seed)
        result = run_pretrain(experiment, get_run_logger(experiment.paths.log))
    final = result.log.rows[-1].breakdown
    click.echo(f"Pretrained {experiment.train.steps} steps: reconstruction={final.pretrain_term:.6f}")
    click.echo(f"Checkpoint: {experiment.paths.checkpoint}")
