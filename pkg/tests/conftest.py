"""Collects the acceptance-criterion verdicts and prints them after the run."""
import pytest

_VERDICTS = {}


@pytest.fixture
def verdict(request):
    """Call ``verdict(n, ok, detail)`` once per criterion; the test then asserts ``ok``."""
    def record(number, ok, detail):
        _VERDICTS[number] = (bool(ok), detail)
        assert ok, f"criterion {number}: {detail}"
    return record


def pytest_runtest_makereport(item, call):
    # a criterion test that errored before recording still gets a FAIL line
    number = getattr(item.function, "criterion", None)
    if number is not None and call.when == "call" and call.excinfo is not None:
        _VERDICTS.setdefault(number, (False, str(call.excinfo.value).splitlines()[0]))


def pytest_terminal_summary(terminalreporter):
    if not _VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_VERDICTS):
        ok, detail = _VERDICTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
