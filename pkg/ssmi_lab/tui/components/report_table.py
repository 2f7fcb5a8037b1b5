"""Table of the per-configuration rows of one report."""

from typing import Any

from textual.app import ComposeResult
from textual.containers import Container
from textual.widgets import DataTable

from ...core.report import ROW_COLUMNS, EvalReport, EvalRow


def row_cells(row: EvalRow) -> tuple[str, ...]:
    return (
        row.ablation,
        f"{row.noise_sigma:g}",
        row.freeze_mode,
        f"{row.token_accuracy:.4f}",
        f"{row.bleu4:.4f}",
        f"{row.recon_mse:.4f}",
        f"{row.degradation:+.4f}",
    )


class ReportTable(Container):
    """Rows of the current report; ``s`` cycles the sort column."""

    DEFAULT_CSS = """
    ReportTable {
        height: auto;
        min-height: 6;
        border: solid $panel;
        background: $surface;
    }

    ReportTable:focus-within {
        border: round $accent;
    }

    ReportTable > DataTable > .datatable--header {
        background: $panel;
        text-style: bold;
    }
    """

    def __init__(self, *args: Any, **kwargs: Any) -> None:
        super().__init__(*args, **kwargs, id="report-table-container")
        self._rows: list[EvalRow] = []
        self.sort_column = 0

    def compose(self) -> ComposeResult:
        self.table: DataTable[str] = DataTable(
            id="report-table", zebra_stripes=True, cursor_type="row"
        )
        self.table.add_columns(*ROW_COLUMNS)
        yield self.table

    def show(self, report: EvalReport) -> None:
        self._rows = list(report.rows)
        self.update_table()

    def sorted_rows(self) -> list[EvalRow]:
        column = ROW_COLUMNS[self.sort_column]
        return sorted(self._rows, key=lambda r: getattr(r, column))

    def cycle_sort(self) -> str:
        """Advance the sort column and redraw; returns the new column name."""
        self.sort_column = (self.sort_column + 1) % len(ROW_COLUMNS)
        self.update_table()
        return ROW_COLUMNS[self.sort_column]

    def update_table(self) -> None:
        self.table.clear()
        for i, row in enumerate(self.sorted_rows()):
            self.table.add_row(*row_cells(row), key=str(i))
