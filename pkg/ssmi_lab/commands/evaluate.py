"""Eval command for ssmi-lab."""

import click

from ..core.config import load_config
from ..core.experiment import evaluate as run_evaluate
from ..core.models import EvalMode
from ..core.report import EvalReport
from .common import reported_errors


def run_eval(checkpoint: str, mode: EvalMode, config: str | None, report: str | None) -> EvalReport:
    with reported_errors():
        experiment = load_config(config) if config else None
        return run_evaluate(checkpoint, mode, experiment, report)


def echo_summary(result: EvalReport) -> None:
    click.echo(
        f"{result.mode.value}: accuracy={result.token_accuracy:.4f} "
        f"bleu4={result.bleu4:.4f} trainable_ratio={result.trainable_ratio:.6f}"
    )


@click.command(name="eval")
@click.argument("checkpoint", type=click.Path(dir_okay=False))
@click.option(
    "--mode",
    type=click.Choice([m.value for m in EvalMode]),
    default=EvalMode.STANDARD.value,
    show_default=True,
    help="Evaluation protocol",
)
@click.option("--config", type=click.Path(dir_okay=False), help="Experiment config (default: the one stored in the checkpoint)")
@click.option("--report", type=click.Path(dir_okay=False), help="Report path (default: paths.report)")
def evaluate(checkpoint: str, mode: str, config: str | None, report: str | None) -> None:
    """Evaluate a checkpoint on the held-out split and write a report."""
    echo_summary(run_eval(checkpoint, EvalMode(mode), config, report))
