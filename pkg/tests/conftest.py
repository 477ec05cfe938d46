import pytest

_VERDICTS = []


@pytest.fixture
def verdict():
    """Record one acceptance line; it is printed now and repeated in the
    terminal summary so that it survives output capture."""

    def record(tag, passed, detail=""):
        line = f"{'PASS' if passed else 'FAIL'} {tag}: {detail}"
        print(line)
        _VERDICTS.append(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
