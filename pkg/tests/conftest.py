import sys

import numpy as np
import pytest

from netab.graph import Graph, erdos_renyi, parse_edge_list


@pytest.fixture
def path3() -> Graph:
    return parse_edge_list("0 1\n1 2\n")


@pytest.fixture(scope="session")
def er_small() -> Graph:
    return erdos_renyi(200, 8, seed=11)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "ACCEPTANCE_RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for key in sorted(results):
            terminalreporter.write_line(results[key])
