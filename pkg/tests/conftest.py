import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from toricgeo import PLConvexFunction, preset

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def cp1():
    return preset("CP1")


@pytest.fixture(scope="session")
def cp2():
    return preset("CP2")


@pytest.fixture(scope="session")
def square():
    return preset("CP1xCP1")


@pytest.fixture(scope="session")
def hirzebruch():
    return preset("Hirzebruch1")


@pytest.fixture(scope="session")
def f_abs(cp1):
    """|x - 1/2| on the unit interval."""
    return PLConvexFunction(cp1, [((-1,), "1/2"), ((1,), "-1/2")])


@pytest.fixture(scope="session")
def f_ramp(square):
    """max(0, x1 - 1/2) on the unit square."""
    return PLConvexFunction(square, [((0, 0), 0), ((1, 0), "-1/2")])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
