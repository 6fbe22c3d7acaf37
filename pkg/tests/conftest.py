import numpy as np
import pytest

from maxstab.fields import Grid3
from maxstab.geometry import DomainSpec, build_domain


@pytest.fixture(scope="session")
def flat_domain():
    return build_domain(DomainSpec("flat", (-0.5, -0.5, -1.0), (0.5, 0.5, 0.0), resolution=8))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def node_cube():
    return Grid3.cube(24, 1.0, "node")


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for res in sorted(RESULTS, key=lambda r: r.number):
            terminalreporter.write_line(res.line())
