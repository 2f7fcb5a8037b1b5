"""Logger setup for ssmi-lab.

Two streams exist. Human-readable progress and warnings go through the
``ssmi-lab.run`` logger configured here. Per-step loss values go to the
tab-separated training log written by ``core.training``.
"""

import logging
from pathlib import Path

from .constants import DEFAULT_LOG_FILE

RUN_LOGGER = "ssmi-lab.run"

LOG_FORMAT = "[%(asctime)s] [%(name)s] %(levelname)s: %(message)s"
DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def _handler_for(log_file: str | Path | None) -> logging.Handler:
    if log_file is None:
        return logging.StreamHandler()
    path = Path(log_file)
    path.parent.mkdir(parents=True, exist_ok=True)
    return logging.FileHandler(path, encoding="utf-8")


def setup_logger(
    name: str,
    log_file: str | Path | None = None,
    level: int = logging.INFO,
) -> logging.Logger:
    """Return logger ``name`` with a single handler attached.

    Args:
        name: Logger name.
        log_file: Append to this file, creating parent directories. None logs to stderr.
        level: Threshold for the logger.

    A logger that already has handlers is returned untouched apart from
    its level, so repeated command invocations in one process do not
    duplicate output.
    """
    logger = logging.getLogger(name)
    logger.setLevel(level)
    if logger.handlers:
        return logger

    handler = _handler_for(log_file)
    handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=DATE_FORMAT))
    logger.addHandler(handler)
    # run output stays out of the root logger (pytest caplog, textual)
    logger.propagate = False
    return logger


def get_run_logger(
    log_file: str | Path | None = DEFAULT_LOG_FILE,
    level: int = logging.INFO,
) -> logging.Logger:
    """Logger used by the training loops and the experiment commands."""
    return setup_logger(RUN_LOGGER, log_file, level)
