import sys

import numpy as np
import pytest

from rank3cell.laminate import MaterialPair
from rank3cell.reconstruct import Rank3Laminate


@pytest.fixture
def mat():
    return MaterialPair(e_plus=1.0, nu=0.3, f=0.5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def triangulated_laminate():
    """Three families at 60, -30 and 30 degrees with stiff widths 0.2, 0.25, 0.5 (f = 0.7)."""
    return Rank3Laminate.from_widths([np.pi / 3, -np.pi / 6, np.pi / 6], [0.2, 0.25, 0.5])


def random_layers(rng, n=None):
    n = n or int(rng.integers(1, 6))
    return rng.dirichlet(np.ones(n)), rng.uniform(-np.pi / 2, np.pi / 2, n)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(acceptance.REPORT):
        terminalreporter.write_line(line)
