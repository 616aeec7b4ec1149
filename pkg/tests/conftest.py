import math

import pytest
from hypothesis import HealthCheck, settings

from qpcocycle.core import Frequency, Potential, schrodinger_family

settings.register_profile(
    "lab", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow], derandomize=True
)
settings.load_profile("lab")

GOLDEN_LE = math.log((3.0 + math.sqrt(5.0)) / 2.0)
R_U_FREE = (3.0 + math.sqrt(5.0)) / 2.0
R_S_FREE = (3.0 - math.sqrt(5.0)) / 2.0

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def golden():
    return Frequency.golden_mean()


@pytest.fixture(scope="session")
def free_family(golden):
    return schrodinger_family(Potential.zero(), golden, -3.0)


@pytest.fixture(scope="session")
def peaked_family(golden):
    return schrodinger_family(Potential.peaked(30.0), golden, -2.2)
