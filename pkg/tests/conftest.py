import pytest

_VERDICTS = []


@pytest.fixture
def verdict():
    """Record and print one acceptance line; fail the test when the criterion fails."""

    def record(criterion, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {criterion} {detail}"
        _VERDICTS.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_VERDICTS, key=lambda s: int(s.split()[1][1:])):
            terminalreporter.write_line(line)
