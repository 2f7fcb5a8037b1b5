"""TUI command for ssmi-lab."""

import click

from ..core.report import read_report
from ..tui.app import run_tui
from .common import reported_errors


@click.command()
@click.argument("paths", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
def tui(paths: tuple[str, ...]) -> None:
    """Browse one or more evaluation reports interactively."""
    with reported_errors():
        for path in paths:
            read_report(path)
    run_tui(list(paths))
