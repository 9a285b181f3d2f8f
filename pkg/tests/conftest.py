import math

import pytest

from adaptive_qht.states import StateSpec

# one representative per family; the coherent amplitude is complex on purpose
TEST_STATES = {
    "coherent": StateSpec.coherent(1.2 * complex(math.cos(0.4), math.sin(0.4))),
    "squeezed": StateSpec.squeezed_from_photons(1.0, theta=0.6),
    "fock": StateSpec.fock(2),
    "cat": StateSpec.cat(1.3),
}


@pytest.fixture(params=sorted(TEST_STATES))
def test_state(request):
    return TEST_STATES[request.param]


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
