import contextlib

import pytest

_ACCEPTANCE = {}


@pytest.fixture
def criterion():
    """Context manager that records a PASS/FAIL line for an acceptance criterion."""

    @contextlib.contextmanager
    def record(number, title):
        info = {"detail": ""}
        try:
            yield info
        except BaseException:
            _ACCEPTANCE[number] = ("FAIL", title, info["detail"])
            raise
        _ACCEPTANCE[number] = ("PASS", title, info["detail"])

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        status, title, detail = _ACCEPTANCE[number]
        terminalreporter.write_line(f"[{status}] criterion {number}: {title}" + (f" ({detail})" if detail else ""))
