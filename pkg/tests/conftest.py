from __future__ import annotations

import pytest

_REPORT: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report() -> list[str]:
    """Lines collected by the acceptance suite, printed in the terminal summary."""
    return _REPORT


def pytest_terminal_summary(terminalreporter):
    if _REPORT:
        terminalreporter.section("acceptance criteria")
        for line in _REPORT:
            terminalreporter.write_line(line)
