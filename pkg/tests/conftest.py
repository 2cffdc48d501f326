import pytest

# criterion number -> (verdict, detail), filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        verdict, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:>2}: {verdict}  {detail}")


@pytest.fixture
def verdict():
    def record(k, ok, detail):
        line = ("PASS" if ok else "FAIL", detail)
        ACCEPTANCE[k] = line
        print(f"criterion {k}: {line[0]}  {detail}")
        return ok

    return record
