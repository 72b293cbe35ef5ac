import numpy as np
import pytest

from thermreg.harness.loop import simulate
from thermreg.harness.scenario import load_scenario
from thermreg.plant import Chip, CoreParams


@pytest.fixture
def params():
    return CoreParams()


@pytest.fixture
def chip():
    return Chip.default()


@pytest.fixture(scope="session")
def fig4_scenario():
    return load_scenario("paper_fig4")


@pytest.fixture(scope="session")
def fig4_run(fig4_scenario):
    return simulate(fig4_scenario)


@pytest.fixture(scope="session")
def frozen_scenario():
    return load_scenario("default")


def bisect(f, lo, hi, tol=1e-13):
    """Plain bisection on a sign change; used as an independent root oracle."""
    flo = f(lo)
    assert flo * f(hi) < 0, "bracket does not straddle a root"
    while hi - lo > tol * max(1.0, abs(lo)):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import VERDICTS
    except ImportError:
        return
    if VERDICTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(VERDICTS):
            terminalreporter.write_line(VERDICTS[n])
