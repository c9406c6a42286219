import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# (criterion, passed, detail) lines collected by the acceptance suite
ACCEPTANCE_LINES: list[tuple[str, bool, str]] = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE_LINES, key=lambda r: int(r[0].split()[0])):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
