"""Unit tests for evaluation reports."""

import pytest

from ssmi_lab.core.constants import REPORT_HEADER
from ssmi_lab.core.errors import ContractError
from ssmi_lab.core.models import EvalMode
from ssmi_lab.core.report import (
    EvalReport,
    EvalRow,
    format_table,
    parse_report,
    read_report,
    render_report,
    write_report,
)


def sample_report() -> EvalReport:
    return EvalReport(
        mode=EvalMode.ROBUSTNESS,
        token_accuracy=0.9753086419753086,
        bleu4=1 / 3,
        trainable_ratio=33792 / 792832,
        seeds=[0, 1, 2],
        rows=[
            EvalRow("none", 0.0, "finetune_ssm", 0.9753086419753086, 1 / 3, 0.1 + 0.2, 0.0),
            EvalRow("none", 0.5, "finetune_ssm", 0.5, 0.25, 1e-17, 0.4753086419753086),
        ],
        flags={"degradation_monotone": "true"},
        info={"config_hash": "abc123", "chance_level": "0.25"},
    )


@pytest.mark.unit
def test_render_parse_round_trip_is_exact():
    report = sample_report()

    text = render_report(report)
    parsed = parse_report(text)

    assert parsed == report
    assert render_report(parsed) == text


@pytest.mark.unit
def test_rendered_layout():
    lines = render_report(sample_report()).splitlines()

    assert lines[0] == REPORT_HEADER
    assert "mode = robustness" in lines
    assert "seeds = 0,1,2" in lines
    assert "aggregation = median" in lines
    assert "reference_ratio = 0.005" in lines
    assert "flag.degradation_monotone = true" in lines
    rows_at = lines.index("[rows]")
    assert lines[rows_at + 1].split("\t")[0] == "ablation"
    assert len(lines) == rows_at + 4


@pytest.mark.unit
def test_write_and_read(tmp_path):
    path = tmp_path / "out" / "report.txt"

    write_report(sample_report(), path)

    assert read_report(path) == sample_report()


@pytest.mark.unit
def test_read_rejects_binary_files(tmp_path):
    path = tmp_path / "model.ssmi"
    path.write_bytes(b"SSMI\x01\x00\x00\x00\xff\xfe\x80")

    with pytest.raises(ContractError, match="not a text report"):
        read_report(path)


@pytest.mark.unit
@pytest.mark.parametrize(
    "text",
    [
        "",
        "# some other file\n",
        f"{REPORT_HEADER}\nmode robustness\n",
        f"{REPORT_HEADER}\nmode = standard\n",
        f"{REPORT_HEADER}\nmode = nonsense\n",
    ],
    ids=["empty", "wrong header", "no separator", "missing keys", "bad mode"],
)
def test_parse_rejects_malformed_reports(text):
    with pytest.raises(ContractError):
        parse_report(text)


@pytest.mark.unit
def test_parse_rejects_short_rows():
    text = render_report(sample_report()) + "none\t1.0\n"

    with pytest.raises(ContractError):
        parse_report(text)


@pytest.mark.unit
def test_validate_rejects_duplicate_rows_and_bad_ranges():
    report = sample_report()
    report.rows.append(report.rows[0])
    with pytest.raises(ContractError):
        report.validate()

    report = sample_report()
    report.bleu4 = 1.5
    with pytest.raises(ContractError):
        render_report(report)


@pytest.mark.unit
def test_row_lookup():
    report = sample_report()

    assert report.row("none", 0.5, "finetune_ssm").token_accuracy == 0.5
    with pytest.raises(KeyError):
        report.row("no_visual", 0.0, "finetune_ssm")


@pytest.mark.unit
def test_format_table_mentions_reference_ratio():
    table = format_table(sample_report())

    assert "robustness" in table
    assert "0.500%" in table
    assert "degradation_monotone: true" in table
