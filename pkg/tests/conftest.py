import pytest

_LINES: dict[int, list[str]] = {}


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion; printed in the summary."""

    def report(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _LINES.setdefault(number, []).append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_LINES):
        for line in _LINES[k]:
            terminalreporter.write_line(line)
