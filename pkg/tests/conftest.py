import numpy as np
import pytest

# criterion id -> list of (part label, passed, detail)
CRITERIA: dict[str, list] = {}


def record(cid: str, part: str, passed: bool, detail: str = ""):
    CRITERIA.setdefault(cid, []).append((part, bool(passed), detail))


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for cid in sorted(CRITERIA, key=lambda c: (int("".join(ch for ch in c if ch.isdigit())), c)):
        parts = CRITERIA[cid]
        ok = all(p[1] for p in parts)
        tr.write_line(f"criterion {cid:>3}: {'PASS' if ok else 'FAIL'}")
        for part, passed, detail in parts:
            tr.write_line(f"    {'ok  ' if passed else 'FAIL'} {part}" + (f"  [{detail}]" if detail else ""))
