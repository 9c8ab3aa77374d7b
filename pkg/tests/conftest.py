import numpy as np
import pytest

from critwave.domain import ModelParams, RadialGrid


@pytest.fixture
def grid():
    return RadialGrid(20.0, 801)


@pytest.fixture
def params():
    return ModelParams(dim=3, v0=3.0, p=2.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS):
        terminalreporter.write_line(RESULTS[key])
