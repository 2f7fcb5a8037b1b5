"""Report browser application."""

from pathlib import Path
from typing import Any

from textual.app import App, ComposeResult

from ..core.errors import SsmiError
from ..core.report import EvalReport, read_report
from .components import ReportTable, SummaryBar
from .pages import MainPage


class ReportBrowserApp(App[None]):
    """Browse evaluation reports; ``n``/``p`` switch between files."""

    TITLE = "ssmi-lab reports"

    BINDINGS = [
        ("n", "next_report", "Next"),
        ("p", "previous_report", "Previous"),
        ("s", "cycle_sort", "Sort"),
        ("r", "reload", "Reload"),
        ("ctrl+q", "quit", "Quit"),
    ]

    def __init__(self, paths: list[str], **kwargs: Any) -> None:
        super().__init__(**kwargs)
        self.paths = [Path(p) for p in paths]
        self.index = 0
        self.reports: dict[Path, EvalReport] = {}

    def compose(self) -> ComposeResult:
        yield MainPage()

    def on_mount(self) -> None:
        self.show_current()
        self.set_focus(self.query_one(ReportTable).table)

    @property
    def current_path(self) -> Path:
        return self.paths[self.index]

    def load(self, path: Path, force: bool = False) -> EvalReport:
        if force or path not in self.reports:
            self.reports[path] = read_report(path)
        return self.reports[path]

    def show_current(self, force: bool = False) -> None:
        try:
            report = self.load(self.current_path, force)
        except (OSError, SsmiError) as exc:
            self.notify(f"Cannot read {self.current_path}: {exc}", severity="error")
            return
        self.sub_title = f"{self.index + 1}/{len(self.paths)}"
        self.query_one(SummaryBar).show(report, str(self.current_path))
        self.query_one(ReportTable).show(report)

    def action_next_report(self) -> None:
        self.index = (self.index + 1) % len(self.paths)
        self.show_current()

    def action_previous_report(self) -> None:
        self.index = (self.index - 1) % len(self.paths)
        self.show_current()

    def action_cycle_sort(self) -> None:
        column = self.query_one(ReportTable).cycle_sort()
        self.notify(f"Sorted by {column}", timeout=1.5)

    def action_reload(self) -> None:
        self.show_current(force=True)


def run_tui(paths: list[str]) -> None:
    """Run the report browser on the given report files."""
    ReportBrowserApp(paths).run()
