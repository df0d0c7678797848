from __future__ import annotations

import pytest

from reorch import load_fixture

# filled by test_acceptance; printed once at the end of the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def tiny():
    return load_fixture("tiny")


@pytest.fixture
def coex():
    return load_fixture("coex")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
