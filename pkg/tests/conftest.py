import numpy as np
import pytest

from cyclesync.dynamics import DEFAULT_QUARTIC, AgentParams
from cyclesync.fixtures import demo_flow_table
from cyclesync.networks import build_io_network, build_topology


@pytest.fixture(scope="session")
def cycle_params():
    return AgentParams.with_steady_state(-0.04, 0.4, 0.1, DEFAULT_QUARTIC)


@pytest.fixture(scope="session")
def two_clique_adj():
    # bridge between the third and fourth node
    return build_topology("two_clique", sizes=(3, 3), bridge=(2, 3))


@pytest.fixture(scope="session")
def demo_io_network():
    return build_io_network(demo_flow_table())


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        print(f"\n[ACCEPTANCE] {name}: {report.outcome.upper()}")
