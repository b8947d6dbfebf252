import numpy as np
import pytest

from mesoeig.geometry import Domain, bundled_config, cluster_from_config
from mesoeig.kernels import KernelContext

# acceptance results collected by tests/test_acceptance.py
ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def ctx7():
    return KernelContext(7.0)


@pytest.fixture(scope="session")
def ball7():
    return Domain(7.0)


@pytest.fixture(scope="session")
def table1_n8():
    return cluster_from_config(bundled_config("table1_N8"))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
