import pytest

ACCEPTANCE = {}


@pytest.fixture
def record():
    """Record one acceptance line: record(criterion_id, passed, detail)."""

    def _record(key, passed, detail=""):
        ACCEPTANCE[key] = (bool(passed), detail)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {key}  {detail}")
