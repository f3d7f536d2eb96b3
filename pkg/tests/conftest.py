import os
import sys

import pytest

HERE = os.path.dirname(__file__)
sys.path.insert(0, HERE)

from acceptance_log import RESULTS  # noqa: E402


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[n])


@pytest.fixture
def cmus_env(monkeypatch):
    monkeypatch.delenv("CMUS_PRECISION_POLICY", raising=False)
    return os.environ


@pytest.fixture(autouse=True)
def _restore_mpmath_precision():
    import mpmath

    dps = mpmath.mp.dps
    yield
    mpmath.mp.dps = dps
