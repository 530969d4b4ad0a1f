import pytest

_RESULTS: dict[int, tuple[str, bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line; the test then asserts on the outcome."""

    def record(number: int, title: str, ok: bool, detail: str) -> bool:
        _RESULTS[number] = (title, ok, detail)
        print(f"criterion {number} {title}: {'PASS' if ok else 'FAIL'} ({detail})")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, ok, detail = _RESULTS[number]
        terminalreporter.write_line(f"criterion {number} {title}: {'PASS' if ok else 'FAIL'} ({detail})")
