import math

import numpy as np
import pytest

from effham.action import (
    ActionQuery,
    InitialDatum,
    hopf_lax,
    lax_oleinik,
    minimal_action,
    minimal_action_torus,
    minimal_action_torus_rescaled,
    search_radius,
)
from effham.mather import AnalyticQuadraticBeta, DirectBetaEvaluator
from effham.topology import f_eps


def test_free_straight_line_action(circle, free1):
    # constant-speed segment: (3/2)^2 / 2 * 2
    query = ActionQuery(circle.point([0.0]), circle.point([0.0], [3]), 2.0)
    assert minimal_action(circle, free1, query) == pytest.approx(2.25, abs=1e-9)


def test_loop_two_circuits_matches_time_allocation(loop2_cover, loop2_lag):
    query = ActionQuery(loop2_cover.vertex_point(0),
                        loop2_cover.vertex_point(0, [2]), 1.0)
    got = minimal_action(loop2_cover, loop2_lag, query)
    assert got == pytest.approx(8.5, abs=1e-9)

    # oracle: constant-speed travel for tau of the horizon, rest for the
    # remainder; both phases sit on potential 0.5
    dist = 4.0
    taus = np.linspace(0.01, 1.0, 100)
    costs = dist**2 / (2.0 * taus) + 0.5 * taus + 0.5 * (1.0 - taus)
    assert got == pytest.approx(float(np.min(costs)), abs=1e-9)


def test_pendulum_resting_rate(circle, pendulum):
    # parking on the potential maximum gives running cost -1 forever
    query = ActionQuery(circle.point([0.0]), circle.point([0.0]), 32.0)
    value = minimal_action(circle, pendulum, query)
    assert value / 32.0 == pytest.approx(-1.0, abs=1e-9)


def test_search_radius_flat_datum(circle, free1):
    flat = InitialDatum.affine([0.0])
    assert search_radius(flat, circle, free1, 0.5, 1.0, (1.0, 1.0)) >= 0.0


def test_search_radius_covers_linear_drift(circle, free1):
    datum = InitialDatum.affine([1.0])
    radius = search_radius(datum, circle, free1, 0.5, 1.0, (1.0, 1.0))
    # the optimal displacement for slope 1 over unit time has length 1
    assert radius >= 1.0


def test_search_radius_finite_and_monotone_in_slope(circle, free1):
    r1 = search_radius(InitialDatum.affine([1.0]), circle, free1, 0.5, 1.0, (1.0, 1.0))
    r_offset = search_radius(InitialDatum.affine([1.0], c=1000.0), circle, free1,
                             0.5, 1.0, (1.0, 1.0))
    r_steep = search_radius(InitialDatum.affine([1000.0]), circle, free1,
                            0.5, 1.0, (1.0, 1.0))
    for r in (r1, r_offset, r_steep):
        assert math.isfinite(r)
    assert r_steep > r1


def test_search_radius_rejects_bad_scale(circle, free1):
    with pytest.raises(ValueError):
        search_radius(InitialDatum.affine([0.0]), circle, free1, 0.0, 1.0, (1.0, 1.0))


def test_lax_free_affine_is_exact(circle, free1):
    datum = InitialDatum.affine([0.7], c=0.1)
    x = circle.point([0.25], [1])
    for eps in (0.5, 0.25):
        got = lax_oleinik(circle, free1, datum, x, 1.5, eps)
        expect = 0.7 * f_eps(circle, x, eps)[0] + 0.1 - 0.5 * 0.7**2 * 1.5
        assert got == pytest.approx(expect, abs=1e-9)


def test_lax_constant_datum_zero_potential(circle, free1, loop2_cover, loop2_free):
    up = InitialDatum.affine([0.0], c=0.7)
    got = lax_oleinik(loop2_cover, loop2_free, up, loop2_cover.edge_point(0, 0.3), 1.0, 0.5)
    assert got == pytest.approx(0.7, abs=1e-12)
    down = InitialDatum.affine([0.0], c=-0.3)
    got = lax_oleinik(circle, free1, down, circle.point([0.6]), 2.0, 0.25)
    assert got == pytest.approx(-0.3, abs=1e-12)


def test_lax_cone_tip_matches_winding_enumeration(loop2_cover, loop2_free):
    datum = InitialDatum.cone(1.0, dim=1)
    tip = loop2_cover.vertex_point(0)
    got = lax_oleinik(loop2_cover, loop2_free, datum, tip, 1.0, 0.5)
    assert got == pytest.approx(0.0, abs=1e-12)

    brute = math.inf
    for n in range(-10, 11):
        start = loop2_cover.vertex_point(0, [n])
        datum_part = datum.value(f_eps(loop2_cover, start, 0.5))
        query = ActionQuery(start, tip, 1.0 / 0.5)
        brute = min(brute, datum_part + 0.5 * minimal_action(loop2_cover, loop2_free, query))
    assert got == pytest.approx(brute, abs=1e-9)


def test_lax_shifted_cone_picks_interior_start(loop2_cover, loop2_free):
    # minimizing 0.8*(2 - w/2) + w^2/2 over winding w gives w*=0.4, value 1.52
    datum = InitialDatum.cone(0.8, center=[2.0], dim=1)
    got = lax_oleinik(loop2_cover, loop2_free, datum, loop2_cover.vertex_point(0), 1.0, 0.5)
    assert got == pytest.approx(1.52, abs=1e-9)


def test_lax_monotone_in_datum(loop2_cover, loop2_free):
    lower = InitialDatum.affine([0.0])
    upper = InitialDatum.quadratic([[1.0]])
    for t in (0.5, 1.0):
        for s in (0.0, 0.7):
            x = loop2_cover.edge_point(0, s)
            lo = lax_oleinik(loop2_cover, loop2_free, lower, x, t, 0.5)
            hi = lax_oleinik(loop2_cover, loop2_free, upper, x, t, 0.5)
            assert lo <= hi + 1e-12


def test_lax_rejects_nonpositive_time_or_scale(circle, free1):
    datum = InitialDatum.affine([0.0])
    with pytest.raises(ValueError):
        lax_oleinik(circle, free1, datum, circle.base_point(), 0.0, 0.5)
    with pytest.raises(ValueError):
        lax_oleinik(circle, free1, datum, circle.base_point(), 1.0, -0.25)


def test_action_semigroup_on_torus_midpoint_mesh(circle, free1):
    start = circle.point([0.0])
    end = circle.point([0.0], [3])
    direct = minimal_action(circle, free1, ActionQuery(start, end, 2.0))
    split = math.inf
    for k in range(4):
        for frac in (0.0, 0.25, 0.5, 0.75):
            mid = circle.point([frac], [k])
            first = minimal_action(circle, free1, ActionQuery(start, mid, 1.0))
            second = minimal_action(circle, free1, ActionQuery(mid, end, 1.0))
            split = min(split, first + second)
    assert split >= direct - 1e-9
    assert split == pytest.approx(direct, abs=1e-9)


def test_action_semigroup_on_graph_midpoint_mesh(loop2_cover, loop2_free):
    start = loop2_cover.vertex_point(0)
    end = loop2_cover.vertex_point(0, [1])
    direct = minimal_action(loop2_cover, loop2_free, ActionQuery(start, end, 1.0))
    assert direct == pytest.approx(2.0, abs=1e-9)
    split = math.inf
    mids = [loop2_cover.edge_point(0, s) for s in (0.0, 0.5, 1.0, 1.5)]
    mids.append(loop2_cover.vertex_point(0, [1]))
    for mid in mids:
        first = minimal_action(loop2_cover, loop2_free, ActionQuery(start, mid, 0.5))
        second = minimal_action(loop2_cover, loop2_free, ActionQuery(mid, end, 0.5))
        split = min(split, first + second)
    assert split >= direct - 1e-9
    assert split == pytest.approx(direct, abs=1e-9)


def test_compressed_time_route_matches_direct(pendulum, free2):
    cases = [
        (pendulum, 0.25, [0.0], [0.3], 1.0),
        (pendulum, 0.5, [0.1], [1.2], 2.0),
        (free2, 0.25, [0.0, 0.0], [0.4, -0.3], 1.0),
    ]
    for model, eps, y, x, t in cases:
        via_slow = minimal_action_torus_rescaled(model, eps, np.array(y), np.array(x), t)
        direct = eps * minimal_action_torus(model, np.array(y), np.array(x), t / eps)
        assert abs(via_slow - direct) <= 1e-9


def test_hopf_affine_with_quadratic_rates(circle):
    beta = AnalyticQuadraticBeta(np.eye(1))
    got = hopf_lax(beta, InitialDatum.affine([1.0]), [0.1], 1.0)
    assert got == pytest.approx(-0.4, abs=1e-12)


def test_hopf_flat_datum_charges_rest_rate(loop2, loop2_lag):
    beta = DirectBetaEvaluator(loop2, loop2_lag)
    got = hopf_lax(beta, InitialDatum.affine([0.0]), [0.0], 3.0)
    assert got == pytest.approx(1.5, abs=1e-9)


def test_hopf_cone_outside_light_cone(circle):
    beta = AnalyticQuadraticBeta(np.eye(1))
    got = hopf_lax(beta, InitialDatum.cone(1.0, dim=1, norm="l2"), [1.2], 1.0)
    assert got == pytest.approx(0.7, abs=1e-9)


def test_hopf_short_time_recovers_datum(circle):
    beta = AnalyticQuadraticBeta(np.eye(1))
    datum = InitialDatum.cone(1.0, dim=1, norm="l2")
    got = hopf_lax(beta, datum, [0.4], 1e-3)
    assert abs(got - datum.value([0.4])) <= 1e-2


def test_query_rejects_nonpositive_horizon(circle):
    with pytest.raises(ValueError):
        ActionQuery(circle.base_point(), circle.base_point(), 0.0)
