import numpy as np
import pytest

from timeres.grids import PumpSpec, TimeGrid, lorentzian_photon
from timeres.jsa import ring_photon


@pytest.fixture(scope="session")
def grid():
    return TimeGrid()


@pytest.fixture(scope="session")
def lorentz_pair(grid):
    """Pure ring photons 6.8 GHz apart, 3.8 GHz wide."""
    return lorentzian_photon(-3.4, 3.8, grid), lorentzian_photon(3.4, 3.8, grid)


@pytest.fixture(scope="session")
def ring_pair(grid):
    """Mixed heralded photons from pumped rings 6.8 GHz apart."""
    pump = PumpSpec(1541.3, 100.0, 20.0)
    return ring_photon(-3.4, 3.8, pump, grid), ring_photon(3.4, 3.8, pump, grid)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance line, print it and assert on it."""

    def check(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {label}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
