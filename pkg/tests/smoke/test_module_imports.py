"""Smoke tests for module imports and basic structure."""

import subprocess
import sys

import pytest

from ssmi_lab import __version__
from ssmi_lab.cli import cli
from ssmi_lab.core import ExperimentConfig, LvlmConfig, LvlmModel, SsmiError
from ssmi_lab.core.numerics import Tensor
from ssmi_lab.core.ssm import init_stable
from ssmi_lab.tui import ReportBrowserApp


@pytest.mark.smoke
def test_micro_model_runs():
    model = LvlmModel.build(LvlmConfig.micro(), seed=0)

    probs = model.forward([0, 1], Tensor([0.0, 0.0, 0.0]))

    assert probs.shape == (2, 5)


@pytest.mark.smoke
def test_stable_ssm_can_be_initialized():
    params = init_stable(seed=0, n=4, d=3, d_v=2, scale=0.9)

    assert params.A.shape == (4, 4)


@pytest.mark.smoke
def test_public_names():
    assert issubclass(ExperimentConfig, object)
    assert SsmiError.exit_code == 1
    assert ReportBrowserApp.TITLE == "ssmi-lab reports"
    assert __version__


@pytest.mark.smoke
def test_cli_lists_every_command():
    assert set(cli.commands) == {"pretrain", "finetune", "eval", "ablate", "report", "tui"}


@pytest.mark.smoke
def test_module_execution_with_help_flag_succeeds():
    result = subprocess.run(
        [sys.executable, "-m", "ssmi_lab", "--help"],
        capture_output=True,
        text=True,
    )

    assert result.returncode == 0
    assert "pretrain" in result.stdout
