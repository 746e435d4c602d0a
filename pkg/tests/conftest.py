import numpy as np
import pytest

from mimc.rate_model import RateParameters


@pytest.fixture
def iso3():
    """Isotropic 3D rates of the elliptic example: w=2, s=4, gamma=2."""
    return RateParameters.isotropic(3, beta=2.0, w=2.0, s=4.0, gamma=2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    module = __import__("sys").modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.summary_lines():
        terminalreporter.write_line(line)
