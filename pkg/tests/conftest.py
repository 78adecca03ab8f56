import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ioncrystal.equilibrium import PotentialModel, find_equilibrium
from ioncrystal.trap import TrapConfig, trap_at_alpha

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def trap2():
    """Reference trap tuned to alpha = 2."""
    return trap_at_alpha(2.0, TrapConfig())


@pytest.fixture(scope="session")
def crystal7(trap2):
    return find_equilibrium(PotentialModel.from_trap(trap2, 7))


@pytest.fixture(scope="session")
def orbit7(trap2, crystal7):
    from ioncrystal.modes import find_periodic_orbit

    return find_periodic_orbit(trap2, crystal7)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for res in sorted(RESULTS, key=lambda r: r.number):
            terminalreporter.write_line(res.line())
