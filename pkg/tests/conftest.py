import pytest

_CRITERIA: dict[tuple[int, str], str] = {}


@pytest.fixture
def criterion():
    """Record and print one pass/fail line for an acceptance criterion."""

    def report(number: int, title: str, passed: bool, detail: str = "", part: str = "") -> bool:
        label = f"{number}/{part}" if part else str(number)
        line = f"criterion {label} {'PASS' if passed else 'FAIL'}: {title}"
        if detail:
            line += f" ({detail})"
        _CRITERIA[(number, part)] = line
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for key in sorted(_CRITERIA):
            terminalreporter.write_line(_CRITERIA[key])
