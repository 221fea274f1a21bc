"""Collects one pass/fail line per acceptance criterion and prints them at the end of the run."""

import pytest

_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance():
    def record(label: str, passed: bool | None, detail: str) -> bool | None:
        status = "SKIP" if passed is None else "PASS" if passed else "FAIL"
        _LINES.append(f"{status}  {label}: {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
