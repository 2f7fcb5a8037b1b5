"""Summary bar showing the headline values of one report."""

from typing import Any

from textual.widgets import Static

from ...core.report import EvalReport


def summary_text(report: EvalReport, source: str = "") -> str:
    """Headline metrics, flags and info entries as display lines."""
    lines = [
        f"{source}  [{report.mode.value}]" if source else f"[{report.mode.value}]",
        f"accuracy {report.token_accuracy:.4f}   BLEU-4 {report.bleu4:.4f}   "
        f"trainable ratio {report.trainable_ratio:.6f} (reference {report.reference_ratio:.3%})",
        f"seeds {', '.join(str(s) for s in report.seeds) or '-'} ({report.aggregation})",
    ]
    lines.extend(f"{k}: {v}" for k, v in sorted(report.flags.items()))
    chance = report.info.get("chance_level")
    if chance is not None:
        lines.append(f"chance level: {float(chance):.4f}")
    return "\n".join(lines)


class SummaryBar(Static):
    """Header panel above the rows table."""

    DEFAULT_CSS = """
    SummaryBar {
        height: auto;
        background: $panel;
        color: $foreground;
        padding: 0 2;
        border: solid $accent;
        margin-bottom: 1;
    }
    """

    def __init__(self, *args: Any, **kwargs: Any) -> None:
        super().__init__("No report loaded", *args, **kwargs, id="summary-bar")

    def show(self, report: EvalReport, source: str = "") -> None:
        self.update(summary_text(report, source))
