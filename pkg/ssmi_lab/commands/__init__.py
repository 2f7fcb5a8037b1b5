"""CLI commands for ssmi-lab."""

from .ablate import ablate
from .evaluate import evaluate
from .finetune import finetune
from .pretrain import pretrain
from .report import report
from .tui import tui

__all__ = ["pretrain", "finetune", "evaluate", "ablate", "report", "tui"]
