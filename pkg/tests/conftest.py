import pytest

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def report_criterion():
    """Record one pass/fail line per acceptance criterion for the terminal summary."""

    def record(number: int, name: str, passed: bool, detail: str) -> bool:
        _ACCEPTANCE[number] = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {name}: {detail}"
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])
