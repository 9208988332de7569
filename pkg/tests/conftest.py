import pytest

_LINES: dict[str, str] = {}


@pytest.fixture
def report():
    """Record one summary line per acceptance criterion."""

    def record(key: str, ok: bool, detail: str, expected_failure: bool = False) -> None:
        status = "PASS" if ok else ("FAIL (expected, see notes)" if expected_failure else "FAIL")
        line = f"criterion {key}: {status} | {detail}"
        _LINES[key] = line
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(_LINES, key=lambda k: (int(k.split()[0].rstrip("abcdefghijklmnopqrstuvwxyz")), k)):
        terminalreporter.write_line(_LINES[key])
