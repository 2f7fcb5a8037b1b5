"""Shared pieces of the ssmi-lab commands."""

import logging
from collections.abc import Callable, Iterator
from contextlib import contextmanager
from typing import Any, TypeVar

import click

from ..core.config import ExperimentConfig, apply_overrides, load_config
from ..core.errors import SsmiError

logger = logging.getLogger("ssmi-lab.run")

F = TypeVar("F", bound=Callable[..., Any])


class CommandError(click.ClickException):
    """A library error surfaced with its own exit code."""

    def __init__(self, message: str, exit_code: int) -> None:
        super().__init__(message)
        self.exit_code = exit_code


@contextmanager
def reported_errors() -> Iterator[None]:
    """Turn SsmiError into a one-line message and the matching exit code."""
    try:
        yield
    except SsmiError as exc:
        logger.error(f"{type(exc).__name__}: {exc}")
        raise CommandError(str(exc), exc.exit_code) from exc


def training_overrides(with_lambda: bool) -> Callable[[F], F]:
    """Attach --steps/--lr/--seed (and --lambda) to a command."""

    def decorate(func: F) -> F:
        func = click.option("--seed", type=int, help="Override train.seed")(func)
        if with_lambda:
            func = click.option(
                "--lambda", "lam", type=float, help="Override train.lambda (weight of the pretrain term)"
            )(func)
        func = click.option("--lr", type=float, help="Override train.lr")(func)
        func = click.option("--steps", type=int, help="Override train.steps")(func)
        return func

    return decorate


def load_experiment(path: str, **overrides: Any) -> ExperimentConfig:
    """Load a config file and apply the CLI overrides."""
    flags = {"steps": overrides.get("steps"), "lr": overrides.get("lr"), "seed": overrides.get("seed")}
    if "lam" in overrides:
        flags["lambda"] = overrides["lam"]
    return apply_overrides(load_config(path), **flags)
