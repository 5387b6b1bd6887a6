import numpy as np
import pytest


def pytest_configure(config):
    pytest.acceptance_lines = {}


def pytest_terminal_summary(terminalreporter):
    lines = getattr(pytest, "acceptance_lines", {})
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
