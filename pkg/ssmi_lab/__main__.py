"""Entry point for ssmi-lab."""

from .cli import cli

if __name__ == "__main__":
    cli()
