"""TUI components package."""

from .report_table import ReportTable
from .summary_bar import SummaryBar

__all__ = ["ReportTable", "SummaryBar"]
