import pytest

# filled by test_acceptance.py: (criterion, kind, passed, detail)
ACCEPTANCE: list[tuple[int, str, bool, str]] = []


@pytest.fixture
def record():
    def _record(criterion: int, passed: bool, detail: str, kind: str = "literal") -> bool:
        ACCEPTANCE.append((criterion, kind, bool(passed), detail))
        return bool(passed)

    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in sorted({c for c, *_ in ACCEPTANCE}):
        lit = [(ok, d) for c, k, ok, d in ACCEPTANCE if c == crit and k == "literal"]
        ok_all = all(ok for ok, _ in lit)
        detail = "; ".join(d for _, d in lit)
        tr.write_line(f"{'PASS' if ok_all else 'FAIL'} criterion {crit:2d}: {detail}")
        for c, k, ok, d in ACCEPTANCE:
            if c == crit and k == "companion":
                tr.write_line(f"     companion {'PASS' if ok else 'FAIL'}: {d}")
