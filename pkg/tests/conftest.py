import pytest

# (criterion number, passed, detail) lines filled in by the acceptance tests
CRITERIA: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA):
        ok, detail = CRITERIA[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def criterion(request, capsys):
    """Call with (number, checks) where ``checks`` maps a description to a bool."""

    def record(number: int, checks: dict[str, bool], **measured):
        ok = all(checks.values())
        failed = [name for name, good in checks.items() if not good]
        detail = ", ".join(f"{k}={_fmt(v)}" for k, v in measured.items())
        if failed:
            detail += ("; " if detail else "") + "failed: " + "; ".join(failed)
        CRITERIA[number] = (ok, detail)
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, f"criterion {number}: " + "; ".join(failed)

    return record


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)
