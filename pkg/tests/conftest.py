import pytest

_ACCEPTANCE: dict = {}


@pytest.fixture
def record():
    """Store the outcome line of an acceptance criterion for the terminal summary."""

    def _record(number: int, passed: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} - {detail}"
        prev = _ACCEPTANCE.get(number)
        if prev is not None and not prev[0]:
            return
        _ACCEPTANCE[number] = (passed, line)
        print(line)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[number][1])
