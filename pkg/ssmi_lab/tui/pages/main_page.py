"""Main page: summary bar over the rows table."""

from textual.app import ComposeResult
from textual.containers import Vertical
from textual.widgets import Footer, Header

from ..components import ReportTable, SummaryBar


class MainPage(Vertical):
    """Report browser layout. The table takes the remaining height."""

    DEFAULT_CSS = """
    MainPage > #report-view {
        height: 1fr;
        padding: 0 1;
    }

    MainPage ReportTable {
        height: 1fr;
    }
    """

    def compose(self) -> ComposeResult:
        yield Header(show_clock=False)
        with Vertical(id="report-view"):
            yield SummaryBar()
            yield ReportTable()
        yield Footer()
