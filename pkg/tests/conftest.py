import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from vcsel_snn.config import ExperimentConfig  # noqa: E402


@pytest.fixture
def small_config():
    """A fast 16-node SFM configuration with a hand-filled calibration record."""
    return ExperimentConfig(n_nodes=16, dt=0.2e-12, calibration={"source": "test fixture"})


ACCEPTANCE_LINES = []


def record_criterion(number, passed, detail):
    """Print and remember one pass/fail line for the acceptance summary."""
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} ({detail})"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
