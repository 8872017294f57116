import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pvlab.geometry import SlabGrid, TorusGrid

settings.register_profile("pvlab", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("pvlab")


@pytest.fixture
def small():
    return SlabGrid(17, 17), TorusGrid(8, 8)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[k].line())
