import pytest

# criterion number -> (passed, summary); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def record_criterion():
    def record(number: int, checks: list[tuple[str, bool, str]]):
        ok = all(passed for _, passed, _ in checks)
        detail = "; ".join(f"{name}: {'ok' if passed else 'FAIL'} ({info})" for name, passed, info in checks)
        ACCEPTANCE[number] = (ok, detail)
        print(f"\nCRITERION {number}: {'PASS' if ok else 'FAIL'} | {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}")
