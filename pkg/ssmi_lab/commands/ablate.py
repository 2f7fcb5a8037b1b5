"""Ablate command for ssmi-lab."""

import click

from ..core.models import EvalMode
from .evaluate import echo_summary, run_eval


@click.command()
@click.argument("checkpoint", type=click.Path(dir_okay=False))
@click.option("--config", type=click.Path(dir_okay=False), help="Experiment config (default: the one stored in the checkpoint)")
@click.option("--report", type=click.Path(dir_okay=False), help="Report path (default: paths.report)")
def ablate(checkpoint: str, config: str | None, report: str | None) -> None:
    """Shorthand for ``eval --mode ablate``."""
    result = run_eval(checkpoint, EvalMode.ABLATE, config, report)
    echo_summary(result)
    for row in result.rows:
        click.echo(f"  {row.ablation:<18} accuracy={row.token_accuracy:.4f} bleu4={row.bleu4:.4f}")
