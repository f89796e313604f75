import logging

import numpy as np
import pytest

from steadysweep.systems import get_model


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def duct():
    return get_model("isentropic_duct")


@pytest.fixture(scope="session")
def burgers():
    return get_model("burgers1d_hj")


@pytest.fixture(scope="session")
def nozzle():
    return get_model("nozzle")


@pytest.fixture(autouse=True)
def _quiet_numba():
    logging.getLogger("numba").setLevel(logging.WARNING)


def pytest_terminal_summary(terminalreporter):
    from helpers import acceptance_lines
    lines = acceptance_lines()
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
