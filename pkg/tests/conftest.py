import pytest

_LINES = []


@pytest.fixture
def report(capsys):
    """Record one ``criterion N: PASS|FAIL - detail`` line; printed again in the terminal summary."""

    def emit(tag, ok, detail):
        line = f"criterion {tag}: {'PASS' if ok else 'FAIL'} - {detail}"
        _LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok

    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: s.split(":")[0]):
            terminalreporter.write_line(line)
