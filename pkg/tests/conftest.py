"""Shared channel fixtures and the acceptance-report summary section."""

import sys

import pytest

from avcsim.avc import Avc, load_avc


def make_noisy2() -> Avc:
    """Two-state binary channel: a BSC(0.1) against a uniform scrambler."""
    return Avc(
        [[[0.9, 0.1], [0.1, 0.9]], [[0.5, 0.5], [0.5, 0.5]]],
        [0.0, 1.0],
        name="noisy2",
    )


@pytest.fixture
def bitflip() -> Avc:
    return load_avc("bitflip")


@pytest.fixture
def adder() -> Avc:
    return load_avc("real-adder")


@pytest.fixture
def noisy2() -> Avc:
    return make_noisy2()


def pytest_terminal_summary(terminalreporter):
    """Echo one line per acceptance criterion after the test summary."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT_LINES", None) if mod is not None else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
