import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from effham.model import GraphLagrangian, TorusHamiltonian, TrigPolynomial
from effham.topology import GraphCover, MetricGraph, TorusCover, figure_eight, single_loop

settings.register_profile(
    "effham",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("effham")


def make_pendulum() -> TorusHamiltonian:
    return TorusHamiltonian.mechanical(TrigPolynomial(1, [([1], 1.0, 0.0)]))


@pytest.fixture(scope="session")
def free1() -> TorusHamiltonian:
    return TorusHamiltonian.free(1)


@pytest.fixture(scope="session")
def free2() -> TorusHamiltonian:
    return TorusHamiltonian.free(2)


@pytest.fixture(scope="session")
def pendulum() -> TorusHamiltonian:
    return make_pendulum()


@pytest.fixture(scope="session")
def circle() -> TorusCover:
    return TorusCover(1)


@pytest.fixture(scope="session")
def torus2() -> TorusCover:
    return TorusCover(2)


@pytest.fixture(scope="session")
def loop2() -> MetricGraph:
    return single_loop(2.0)


@pytest.fixture(scope="session")
def loop2_cover(loop2) -> GraphCover:
    return GraphCover(loop2)


@pytest.fixture(scope="session")
def loop2_lag(loop2) -> GraphLagrangian:
    return GraphLagrangian(loop2, [0.5])


@pytest.fixture(scope="session")
def loop2_free(loop2) -> GraphLagrangian:
    return GraphLagrangian(loop2, [0.0])


@pytest.fixture(scope="session")
def fig8() -> MetricGraph:
    return figure_eight(1.0, 1.0)


@pytest.fixture(scope="session")
def fig8_cover(fig8) -> GraphCover:
    return GraphCover(fig8)


@pytest.fixture(scope="session")
def fig8_lag(fig8) -> GraphLagrangian:
    return GraphLagrangian(fig8, [0.3, -0.2])


@pytest.fixture(scope="session")
def fig8_free(fig8) -> GraphLagrangian:
    return GraphLagrangian(fig8, [0.0, 0.0])
