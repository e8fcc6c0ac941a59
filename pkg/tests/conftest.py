import math

import pytest
from hypothesis import settings

from conedelta.geometry import ConeModel

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

ACCEPTANCE_LINES = {}


@pytest.fixture
def record_criterion():
    """Store a one-line verdict for an acceptance criterion."""
    def rec(number, passed, detail):
        prev = ACCEPTANCE_LINES.get(number)
        ok = passed and (prev is None or prev[0])
        text = detail if prev is None else prev[1] + "; " + detail
        ACCEPTANCE_LINES[number] = (ok, text)
    return rec


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE_LINES):
        ok, text = ACCEPTANCE_LINES[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'} | {text}")


@pytest.fixture
def quarter():
    return ConeModel(1.0, math.pi / 4)
