import pytest

_CRITERIA = {}


@pytest.fixture
def criterion(request):
    """Record a named acceptance criterion; its line is printed in the terminal summary."""

    def record(number, title, passed, detail="", part=""):
        _CRITERIA[(number, part)] = (title, bool(passed), detail)
        print(f"criterion {number}{part} {'PASS' if passed else 'FAIL'}: {title} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, part in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[(number, part)]
        label = f"{number}{part}."
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {label:<4} {title}: {detail}")
