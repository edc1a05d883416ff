import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from grassmann_twistor import make_grid

settings.register_profile("pkg", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("pkg")


@pytest.fixture(scope="session")
def grid():
    return make_grid(12, 24)


@pytest.fixture(scope="session")
def fine_grid():
    return make_grid(40, 64)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE = {}


def record(criterion: int, ok: bool, detail: str = ""):
    """Accumulate one acceptance outcome; a criterion passes only if every part passes."""
    prev = ACCEPTANCE.get(criterion)
    parts = [] if prev is None else prev[1]
    ACCEPTANCE[criterion] = ((prev is None or prev[0]) and ok, parts + [detail] if detail else parts)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, parts = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {'; '.join(parts)}")
