import numpy as np
import pytest
from hypothesis import given, strategies as st

from effham.model import (
    GraphLagrangian,
    TorusHamiltonian,
    TrigPolynomial,
    double_legendre_residual,
    fenchel_young_residual,
    legendre_transform,
    legendre_transform_numeric,
    verify_tonelli,
)
from tests.conftest import make_pendulum

PENDULUM = make_pendulum()
FREE1 = TorusHamiltonian.free(1)


def test_free_lagrangian_is_half_speed_squared(free1):
    assert legendre_transform(free1, [0.2], [3.0]) == pytest.approx(4.5, abs=1e-12)


def test_mechanical_lagrangian_subtracts_potential(pendulum):
    # L(x, v) = v^2/2 - V(x) for unit kinetic term
    for x in (0.0, 0.3, 0.71):
        for v in (-1.5, 0.0, 2.0):
            expect = 0.5 * v * v - pendulum.v.value([x])
            assert legendre_transform(pendulum, [x], [v]) == pytest.approx(expect, abs=1e-12)


def test_quartic_transform_matches_grid_scan():
    # sup_p (p v - p^4/4) at v=1 is attained at p=1 with value 3/4
    def quartic(p):
        return 0.25 * float(p) ** 4

    value = legendre_transform_numeric(quartic, 1.0)
    assert value == pytest.approx(0.75, abs=1e-6)

    grid = np.arange(-10.0, 10.0, 1e-4)
    brute = np.max(grid - 0.25 * grid**4)
    assert value == pytest.approx(brute, abs=1e-6)


def test_tonelli_report_free(free1):
    report = verify_tonelli(free1)
    assert report.ok
    assert report.min_kinetic_eig == pytest.approx(1.0, abs=1e-12)


def test_tonelli_report_pendulum(pendulum):
    report = verify_tonelli(pendulum)
    assert report.ok
    assert report.min_kinetic_eig == pytest.approx(1.0, abs=1e-12)


def test_tonelli_rejects_sign_changing_kinetic_coefficient():
    wobble = TorusHamiltonian(1, [TrigPolynomial(1, [([1], 0.0, 1.0)])],
                              TrigPolynomial.constant(1, 0.0))
    report = verify_tonelli(wobble)
    assert not report.ok
    assert not report.convex_ok


def test_graph_lagrangian_shift():
    from effham.topology import single_loop

    lag = GraphLagrangian(single_loop(2.0), [0.5])
    shifted = lag.shifted(0.25)
    assert shifted.potentials[0] == pytest.approx(0.75, abs=1e-15)
    assert shifted.edge_value(0, 1.0) == pytest.approx(lag.edge_value(0, 1.0) + 0.25, abs=1e-15)


@given(
    x=st.floats(min_value=0.0, max_value=1.0),
    v=st.floats(min_value=-4.0, max_value=4.0),
    p=st.floats(min_value=-4.0, max_value=4.0),
)
def test_fenchel_young_gap_nonnegative(x, v, p):
    gap = fenchel_young_residual(PENDULUM, [x], [v], [p])
    assert gap >= -1e-8


@given(
    x=st.floats(min_value=0.0, max_value=1.0),
    v=st.floats(min_value=-4.0, max_value=4.0),
)
def test_fenchel_young_tight_at_momentum_of_velocity(x, v):
    # equality holds when p = dL/dv, which is v for unit kinetic term
    gap = fenchel_young_residual(PENDULUM, [x], [v], [v])
    assert abs(gap) <= 1e-8


@given(
    x=st.floats(min_value=0.0, max_value=1.0),
    p=st.floats(min_value=-4.0, max_value=4.0),
)
def test_double_legendre_recovers_hamiltonian(x, p):
    assert double_legendre_residual(PENDULUM, [x], [p]) <= 1e-8


@given(p1=st.floats(min_value=-3.0, max_value=3.0),
       p2=st.floats(min_value=-3.0, max_value=3.0))
def test_double_legendre_free_two_dim(p1, p2):
    free2 = TorusHamiltonian.free(2)
    assert double_legendre_residual(free2, [0.1, 0.7], [p1, p2]) <= 1e-8
