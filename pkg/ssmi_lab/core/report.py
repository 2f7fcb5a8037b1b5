"""Evaluation reports and their plain-text format.

A report file looks like::

    # ssmi-lab report v1
    mode = robustness
    token_accuracy = 0.975
    bleu4 = 0.91
    trainable_ratio = 0.04262...
    reference_ratio = 0.005
    seeds = 0,1,2
    aggregation = median
    flag.degradation_monotone = true
    info.config_hash = 3f2a...
    [rows]
    ablation<TAB>noise_sigma<TAB>freeze_mode<TAB>token_accuracy<TAB>bleu4<TAB>recon_mse<TAB>degradation
    none<TAB>0.0<TAB>finetune_ssm<TAB>0.975<TAB>0.91<TAB>1.2<TAB>0.0

Floats are written in their shortest round-trip form, so parsing a report
reproduces every value exactly.
"""

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .checkpoint import write_atomic
from .constants import REFERENCE_TRAINABLE_RATIO, REPORT_HEADER
from .errors import ContractError
from .models import EvalMode

ROW_COLUMNS = (
    "ablation",
    "noise_sigma",
    "freeze_mode",
    "token_accuracy",
    "bleu4",
    "recon_mse",
    "degradation",
)


@dataclass(frozen=True)
class EvalRow:
    """Metrics for one (ablation, noise_sigma, freeze_mode) configuration."""

    ablation: str
    noise_sigma: float
    freeze_mode: str
    token_accuracy: float
    bleu4: float
    recon_mse: float
    degradation: float = 0.0

    @property
    def key(self) -> tuple[str, float, str]:
        return (self.ablation, self.noise_sigma, self.freeze_mode)


@dataclass
class EvalReport:
    mode: EvalMode
    token_accuracy: float
    bleu4: float
    trainable_ratio: float
    seeds: list[int]
    rows: list[EvalRow] = field(default_factory=list)
    aggregation: str = "median"
    reference_ratio: float = REFERENCE_TRAINABLE_RATIO
    flags: dict[str, str] = field(default_factory=dict)
    info: dict[str, str] = field(default_factory=dict)

    def validate(self) -> None:
        """Raise ContractError on out-of-range metrics or duplicate row keys."""
        values = [self.token_accuracy, self.bleu4, self.trainable_ratio]
        for row in self.rows:
            values.extend([row.token_accuracy, row.bleu4])
        if any(not 0.0 <= v <= 1.0 for v in values):
            raise ContractError("accuracy, bleu4 and trainable_ratio must lie in [0, 1]")
        keys = [row.key for row in self.rows]
        if len(keys) != len(set(keys)):
            raise ContractError("report rows must be keyed uniquely")

    def row(self, ablation: str, noise_sigma: float, freeze_mode: str) -> EvalRow:
        for r in self.rows:
            if r.key == (ablation, noise_sigma, freeze_mode):
                return r
        raise KeyError((ablation, noise_sigma, freeze_mode))

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["mode"] = self.mode.value
        return data


def _fmt(value: float) -> str:
    return repr(float(value))


def render_report(report: EvalReport) -> str:
    report.validate()
    lines = [
        REPORT_HEADER,
        f"mode = {report.mode.value}",
        f"token_accuracy = {_fmt(report.token_accuracy)}",
        f"bleu4 = {_fmt(report.bleu4)}",
        f"trainable_ratio = {_fmt(report.trainable_ratio)}",
        f"reference_ratio = {_fmt(report.reference_ratio)}",
        f"seeds = {','.join(str(s) for s in report.seeds)}",
        f"aggregation = {report.aggregation}",
    ]
    lines.extend(f"flag.{k} = {v}" for k, v in sorted(report.flags.items()))
    lines.extend(f"info.{k} = {v}" for k, v in sorted(report.info.items()))
    lines.append("[rows]")
    lines.append("\t".join(ROW_COLUMNS))
    for row in report.rows:
        lines.append(
            "\t".join(
                [
                    row.ablation,
                    _fmt(row.noise_sigma),
                    row.freeze_mode,
                    _fmt(row.token_accuracy),
                    _fmt(row.bleu4),
                    _fmt(row.recon_mse),
                    _fmt(row.degradation),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def write_report(report: EvalReport, path: str | Path) -> str:
    text = render_report(report)
    write_atomic(path, text.encode("utf-8"))
    return text


def parse_report(text: str) -> EvalReport:
    """Inverse of ``render_report``.

    Raises:
        ContractError: On a missing header, malformed line or missing key.
    """
    try:
        return _parse_report(text)
    except ValueError as exc:
        raise ContractError(f"malformed report value: {exc}") from exc


def _parse_report(text: str) -> EvalReport:
    lines = text.splitlines()
    if not lines or lines[0] != REPORT_HEADER:
        raise ContractError(f"not a report: expected header {REPORT_HEADER!r}")
    values: dict[str, str] = {}
    flags: dict[str, str] = {}
    info: dict[str, str] = {}
    rows: list[EvalRow] = []
    in_rows = False
    for number, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        if line == "[rows]":
            in_rows = True
            continue
        if in_rows:
            cells = line.split("\t")
            if tuple(cells) == ROW_COLUMNS:
                continue
            if len(cells) != len(ROW_COLUMNS):
                raise ContractError(f"line {number}: expected {len(ROW_COLUMNS)} columns")
            rows.append(
                EvalRow(
                    ablation=cells[0],
                    noise_sigma=float(cells[1]),
                    freeze_mode=cells[2],
                    token_accuracy=float(cells[3]),
                    bleu4=float(cells[4]),
                    recon_mse=float(cells[5]),
                    degradation=float(cells[6]),
                )
            )
            continue
        key, sep, value = line.partition(" = ")
        if not sep:
            raise ContractError(f"line {number}: expected 'key = value'")
        if key.startswith("flag."):
            flags[key[5:]] = value
        elif key.startswith("info."):
            info[key[5:]] = value
        else:
            values[key] = value
    try:
        return EvalReport(
            mode=EvalMode(values["mode"]),
            token_accuracy=float(values["token_accuracy"]),
            bleu4=float(values["bleu4"]),
            trainable_ratio=float(values["trainable_ratio"]),
            reference_ratio=float(values["reference_ratio"]),
            seeds=[int(s) for s in values["seeds"].split(",") if s],
            aggregation=values["aggregation"],
            rows=rows,
            flags=flags,
            info=info,
        )
    except KeyError as exc:
        raise ContractError(f"report lacks key {exc.args[0]!r}") from exc


def read_report(path: str | Path) -> EvalReport:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise ContractError(
            f"{path} is not a text report (byte {exc.start} is not UTF-8)"
        ) from exc
    return parse_report(text)



def format_table(report: EvalReport) -> str:
    """Aligned human-readable rendering used by ``ssmi-lab report``."""
    header = [
        f"mode:            {report.mode.value}",
        f"token accuracy:  {report.token_accuracy:.4f}",
        f"BLEU-4:          {report.bleu4:.4f}",
        f"trainable ratio: {report.trainable_ratio:.6f} (reference {report.reference_ratio:.3%})",
        f"seeds:           {', '.join(str(s) for s in report.seeds)} ({report.aggregation})",
    ]
    header.extend(f"{k}: {v}" for k, v in sorted(report.flags.items()))
    cells = [list(ROW_COLUMNS)]
    for row in report.rows:
        cells.append(
            [
                row.ablation,
                f"{row.noise_sigma:g}",
                row.freeze_mode,
                f"{row.token_accuracy:.4f}",
                f"{row.bleu4:.4f}",
                f"{row.recon_mse:.4f}",
                f"{row.degradation:+.4f}",
            ]
        )
    widths = [max(len(r[i]) for r in cells) for i in range(len(ROW_COLUMNS))]
    table = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    return "\n".join(header + [""] + table)
