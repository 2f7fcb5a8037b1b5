"""Report command for ssmi-lab."""

import json

import click

from ..core.report import format_table, read_report
from .common import reported_errors


@click.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Print the report as JSON")
def report(path: str, as_json: bool) -> None:
    """Pretty-print an evaluation report."""
    with reported_errors():
        parsed = read_report(path)
    if as_json:
        click.echo(json.dumps(parsed.to_dict(), indent=2, sort_keys=True))
    else:
        click.echo(format_table(parsed))
