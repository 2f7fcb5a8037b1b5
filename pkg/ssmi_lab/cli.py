"""Main CLI entry point for ssmi-lab."""

import click

from . import __version__
from .commands import ablate, evaluate, finetune, pretrain, report, tui


@click.group()
@click.version_option(__version__, prog_name="ssmi-lab")
def cli() -> None:
    """Train and evaluate state space memory modules in a frozen toy LVLM."""


# Register subcommands
cli.add_command(pretrain)
cli.add_command(finetune)
cli.add_command(evaluate)
cli.add_command(ablate)
cli.add_command(report)
cli.add_command(tui)


if __name__ == "__main__":
    cli()
