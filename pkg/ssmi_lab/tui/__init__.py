"""Report browser TUI for ssmi-lab."""

from .app import ReportBrowserApp

__all__ = ["ReportBrowserApp"]
