import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from effham.mather import (
    AnalyticQuadraticBeta,
    BetaHatEvaluator,
    DirectBetaEvaluator,
    GridEvaluator,
    MechanicalBeta1D,
    alpha_beta_duality,
    alpha_graph,
    alpha_torus_minimax,
    alpha_torus_quadrature,
    beta_graph,
    beta_hat,
    effective_hamiltonian_subcover,
    mean_action_check,
    tabulate_evaluator,
)
from effham.model import GraphLagrangian, TorusHamiltonian, TrigPolynomial
from effham.topology import GraphCover, SubcoverMap, TorusCover, figure_eight
from tests.conftest import make_pendulum

FIG8 = figure_eight(1.0, 1.0)
FIG8_LAG = GraphLagrangian(FIG8, [0.3, -0.2])


def cycle_threshold_alpha(cycles, potentials, p):
    """Independent route to the effective level on a graph.

    Each directed cycle contributes the smallest level whose momentum
    integral sum_e len_e * sqrt(2(level + V_e)) reaches p.chi; resting on
    the cheapest edge floors the result at -min V.
    """
    best = -min(potentials)
    for edges, chi in cycles:
        w = float(np.dot(p, chi))
        if w <= 0.0:
            continue
        lam_lo = max(-potentials[e] for e, _ in edges)

        def momentum(lam):
            total = sum(ell * np.sqrt(2.0 * max(0.0, lam + potentials[e]))
                        for e, ell in edges)
            return total - w

        if momentum(lam_lo) >= 0.0:
            best = max(best, lam_lo)
            continue
        lam_hi = lam_lo + 1.0
        while momentum(lam_hi) < 0.0:
            lam_hi = 2.0 * lam_hi + 1.0
        best = max(best, brentq(momentum, lam_lo, lam_hi, xtol=1e-13))
    return best


FIG8_CYCLES = []
for sa in (1, -1):
    FIG8_CYCLES.append(([(0, 1.0)], np.array([sa, 0.0])))
    FIG8_CYCLES.append(([(1, 1.0)], np.array([0.0, sa])))
    for sb in (1, -1):
        FIG8_CYCLES.append(([(0, 1.0), (1, 1.0)], np.array([sa, sb])))


@pytest.mark.parametrize("p_val", [-1.5, 0.0, 0.4, 2.3])
def test_alpha_loop_closed_form(loop2, loop2_lag, p_val):
    got = alpha_graph(loop2, loop2_lag, [p_val])
    assert got == pytest.approx(p_val**2 / 8.0 - 0.5, abs=2e-9)
    oracle = cycle_threshold_alpha(
        [([(0, 2.0)], np.array([1.0])), ([(0, 2.0)], np.array([-1.0]))],
        [0.5], [p_val])
    assert got == pytest.approx(oracle, abs=2e-9)


@pytest.mark.parametrize("p_val", [(0.0, 0.0), (0.7, -0.3), (1.2, 0.9),
                                   (2.0, 0.5), (-0.6, 1.4)])
def test_alpha_figure_eight_matches_cycle_enumeration(fig8, fig8_lag, p_val):
    got = alpha_graph(fig8, fig8_lag, list(p_val))
    oracle = cycle_threshold_alpha(FIG8_CYCLES, [0.3, -0.2], list(p_val))
    assert got == pytest.approx(oracle, abs=2e-9)


def test_alpha_rest_level(fig8, fig8_lag, loop2, loop2_lag):
    assert alpha_graph(fig8, fig8_lag, [0.0, 0.0]) == pytest.approx(0.2, abs=1e-12)
    assert alpha_graph(loop2, loop2_lag, [0.0]) == pytest.approx(-0.5, abs=1e-12)


def test_alpha_free_momentum_on_one_loop(fig8, fig8_free):
    got = alpha_graph(fig8, fig8_free, [1.3, 0.0])
    assert got == pytest.approx(1.3**2 / 2.0, abs=2e-9)


def test_alpha_shift_covariance(fig8, fig8_lag):
    for p_val in ((0.3, 0.4), (1.1, -0.8)):
        base = alpha_graph(fig8, fig8_lag, list(p_val))
        shifted = alpha_graph(fig8, fig8_lag.shifted(0.7), list(p_val))
        assert shifted == pytest.approx(base - 0.7, abs=1e-12)


@settings(max_examples=25)
@given(
    p=st.tuples(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0)),
    q=st.tuples(st.floats(-2.0, 2.0), st.floats(-2.0, 2.0)),
)
def test_alpha_midpoint_convexity(p, q):
    mid = [(a + b) / 2.0 for a, b in zip(p, q)]
    lhs = alpha_graph(FIG8, FIG8_LAG, mid)
    rhs = 0.5 * (alpha_graph(FIG8, FIG8_LAG, list(p)) + alpha_graph(FIG8, FIG8_LAG, list(q)))
    assert lhs <= rhs + 1e-6


def test_alpha_superlinear_slope_growth(fig8, fig8_lag):
    direction = np.array([1.0, 0.5])
    a0 = alpha_graph(fig8, fig8_lag, [0.0, 0.0])
    slopes = [(alpha_graph(fig8, fig8_lag, list(t * direction)) - a0) / t
              for t in (1.0, 2.0, 4.0)]
    assert slopes[0] < slopes[1] < slopes[2]


def test_minimax_free_torus(free2):
    assert alpha_torus_minimax(free2, [0.5, 1.0]) == pytest.approx(0.625, abs=1e-9)
    assert alpha_torus_minimax(free2, [1.0, 2.0]) == pytest.approx(2.5, abs=1e-9)


def test_minimax_pendulum_rest_level(pendulum):
    assert alpha_torus_minimax(pendulum, [0.0]) == pytest.approx(1.0, abs=1e-3)


def test_minimax_constant_potential():
    const = TorusHamiltonian.mechanical(TrigPolynomial.constant(1, 0.4))
    assert alpha_torus_minimax(const, [0.0]) == pytest.approx(0.4, abs=1e-9)


@pytest.mark.parametrize("p_val", [0.5, 1.25, 2.0])
def test_minimax_dominates_spatial_average(pendulum, p_val):
    # with zero-mean potential the averaged Hamiltonian at slope p is p^2/2
    assert alpha_torus_minimax(pendulum, [p_val], restarts=2) >= 0.5 * p_val**2 - 1e-9


def test_minimax_rejects_coarse_mesh(pendulum):
    with pytest.raises(ValueError):
        alpha_torus_minimax(pendulum, [0.0], mesh=16)


def test_quadrature_route_values(pendulum, free1):
    assert alpha_torus_quadrature(pendulum, 0.0) == pytest.approx(1.0, abs=1e-10)
    assert alpha_torus_quadrature(free1, 0.8) == pytest.approx(0.32, abs=1e-10)


def test_quadrature_route_is_one_dimensional(free2):
    with pytest.raises(ValueError):
        alpha_torus_quadrature(free2, [0.5, 0.5])


@pytest.mark.parametrize("p_val", [2.5, 4.0])
def test_minimax_agrees_with_quadrature(pendulum, p_val):
    mm = alpha_torus_minimax(pendulum, [p_val])
    qq = alpha_torus_quadrature(pendulum, p_val)
    assert mm == pytest.approx(qq, abs=1e-3)


@pytest.mark.parametrize("h_val", [-1.0, 0.0, 0.3, 1.7])
def test_beta_loop_closed_form(loop2, loop2_lag, h_val):
    got = beta_graph(loop2, loop2_lag, [h_val])
    assert got == pytest.approx(2.0 * h_val**2 + 0.5, abs=1e-9)


def test_beta_even(fig8, fig8_lag):
    for h in ([0.6, -0.4], [1.0, 1.0]):
        neg = [-x for x in h]
        assert beta_graph(fig8, fig8_lag, h) == pytest.approx(
            beta_graph(fig8, fig8_lag, neg), abs=1e-12)


def test_beta_figure_eight_split_strategy(fig8, fig8_free):
    got = beta_graph(fig8, fig8_free, [1.0, 1.0])
    assert got == pytest.approx(2.0, abs=1e-9)
    # oracle: divide the horizon between the two loops, constant speed each
    sigma = np.arange(1, 64) / 64.0
    oracle = float(np.min(1.0 / (2 * sigma) + 1.0 / (2 * (1 - sigma))))
    assert got == pytest.approx(oracle, abs=1e-9)
    # closed form (|h1| + |h2|)^2 / 2 off the diagonal
    assert beta_graph(fig8, fig8_free, [1.5, -0.5]) == pytest.approx(2.0, abs=1e-9)


def test_quadratic_duality_on_grid():
    src = GridEvaluator.from_function(lambda w: 0.5 * float(np.dot(w, w)), 1, 3.0, 193)
    dual = alpha_beta_duality(src, 1.0, 41)
    worst = max(abs(dual.value([p]) - 0.5 * p * p) for p in np.linspace(-1.0, 1.0, 41))
    assert worst <= 1e-3


def test_double_transform_recovers_convex_input():
    src = GridEvaluator.from_function(lambda w: 0.5 * float(np.dot(w, w)), 1, 3.0, 193)
    alpha_tab = alpha_beta_duality(src, 2.0, 129)
    back = alpha_beta_duality(alpha_tab, 1.0, 41)
    worst = max(abs(back.value([w]) - 0.5 * w * w) for w in np.linspace(-1.0, 1.0, 41))
    assert worst <= 1e-3


def test_duality_flags_nonconvex_source():
    axis = np.linspace(-1.5, 1.5, 65)
    bad = GridEvaluator([axis], 0.25 * axis**4 - 0.5 * axis**2)
    report = alpha_beta_duality(bad, 1.0, 17, details=True)
    assert not report.convexity_ok
    assert report.convexity_residual > 1e-6


def test_loop_rates_dualize_to_alpha(loop2, loop2_lag):
    beta_eval = DirectBetaEvaluator(loop2, loop2_lag)
    tab = tabulate_evaluator(beta_eval, 2.0, 129)
    dual = alpha_beta_duality(tab, 1.5, 33)
    worst = max(abs(dual.value([p]) - alpha_graph(loop2, loop2_lag, [p]))
                for p in np.linspace(-1.5, 1.5, 33))
    assert worst <= 1e-3


def test_pendulum_beta_zero_via_quadrature_table(pendulum):
    atab = GridEvaluator.from_function(
        lambda p: alpha_torus_quadrature(pendulum, p), 1, 3.0, 33)
    dual = alpha_beta_duality(atab, 1.0, 9)
    assert dual.value([0.0]) == pytest.approx(-1.0, abs=1e-12)


def test_mechanical_beta_matches_quadrature_dual(pendulum):
    mb = MechanicalBeta1D(pendulum)
    assert mb.value([0.0]) == pytest.approx(-1.0, abs=1e-9)
    grid = np.linspace(-4.0, 4.0, 201)
    sup = max(1.3 * p - alpha_torus_quadrature(pendulum, p) for p in grid)
    assert mb.value([1.3]) == pytest.approx(sup, abs=2e-3)


def test_beta_hat_identity_is_beta(fig8, fig8_lag):
    beta_eval = DirectBetaEvaluator(fig8, fig8_lag)
    ident = SubcoverMap([[1, 0], [0, 1]])
    for z in ((0.4, -1.2), (1.0, 1.0)):
        assert beta_hat(ident, beta_eval, list(z)) == pytest.approx(
            beta_graph(fig8, fig8_lag, list(z)), abs=1e-12)


@pytest.mark.parametrize("z_val,expect", [(0.0, -0.2), (1.0, 0.8)])
def test_beta_hat_projection_scans_dropped_rate(fig8, fig8_lag, z_val, expect):
    beta_eval = DirectBetaEvaluator(fig8, fig8_lag)
    proj = SubcoverMap([[1, 0]])
    got = beta_hat(proj, beta_eval, [z_val])
    assert got == pytest.approx(expect, abs=1e-9)
    oracle = min(beta_graph(fig8, fig8_lag, [z_val, w2])
                 for w2 in np.linspace(-2.0, 2.0, 201))
    assert got == pytest.approx(oracle, abs=1e-12)


@pytest.mark.parametrize("z_val,expect", [(1.0, 0.5), (2.0, 2.0), (1.5, 1.125)])
def test_beta_hat_symmetric_merge(fig8, fig8_free, z_val, expect):
    beta_eval = DirectBetaEvaluator(fig8, fig8_free)
    merge = SubcoverMap([[1, 1]])
    got = beta_hat(merge, beta_eval, [z_val])
    assert got == pytest.approx(expect, abs=1e-9)
    assert got == pytest.approx(beta_graph(fig8, fig8_free, [z_val / 2, z_val / 2]),
                                abs=1e-9)


def test_beta_hat_fiber_upper_bound(fig8, fig8_lag):
    beta_eval = DirectBetaEvaluator(fig8, fig8_lag)
    merge = SubcoverMap([[1, 1]])
    for h1 in np.linspace(-1.5, 1.5, 5):
        for h2 in np.linspace(-1.5, 1.5, 5):
            direct = beta_graph(fig8, fig8_lag, [h1, h2])
            projected = beta_hat(merge, beta_eval, merge.apply([h1, h2]))
            # the kernel scan is a grid, so allow its resolution on top
            assert projected <= direct + 1e-6


def test_effective_subcover_identity_and_pullback(fig8, fig8_lag):
    def alpha_fn(p):
        return alpha_graph(fig8, fig8_lag, p)

    ident = SubcoverMap([[1, 0], [0, 1]])
    assert effective_hamiltonian_subcover(ident, alpha_fn, [0.7, -0.2]) == \
        alpha_fn([0.7, -0.2])
    merge = SubcoverMap([[1, 1]])
    assert effective_hamiltonian_subcover(merge, alpha_fn, [0.6]) == \
        alpha_fn([0.6, 0.6])


def test_subcover_rates_dualize_to_pullback_alpha(fig8, fig8_lag):
    sub = SubcoverMap([[1, 1]])
    bhat = BetaHatEvaluator(sub, DirectBetaEvaluator(fig8, fig8_lag), grid_points=15)
    tab = tabulate_evaluator(bhat, 1.6, 33)
    assert tab.convexity_residual() <= 1e-6
    dual = alpha_beta_duality(tab, 0.8, 9)
    worst = 0.0
    for q in np.linspace(-0.8, 0.8, 9):
        direct = effective_hamiltonian_subcover(
            sub, lambda pp: alpha_graph(fig8, fig8_lag, pp), [q])
        worst = max(worst, abs(dual.value([q]) - direct))
    assert worst <= 1e-3


def test_mean_action_free_torus_is_exact(circle, free1):
    report = mean_action_check(circle, free1, AnalyticQuadraticBeta(np.eye(1)),
                               1.0, [2.0, 4.0])
    assert report.passed()
    assert all(row.delta <= 1e-9 for row in report.rows)


def test_mean_action_loop_decay_bound(loop2_cover, loop2_lag, loop2):
    beta_eval = DirectBetaEvaluator(loop2, loop2_lag)
    report = mean_action_check(loop2_cover, loop2_lag, beta_eval, 1.0,
                               [4.0, 8.0, 16.0])
    assert report.passed()
    for row in report.rows:
        assert row.delta <= 2.0 / row.horizon + 1e-9


def test_mean_action_pendulum_boundary_layer_decays(circle, pendulum):
    report = mean_action_check(circle, pendulum, MechanicalBeta1D(pendulum),
                               1.0, [4.0, 8.0])
    deltas = [row.delta for row in report.rows]
    assert deltas[0] > deltas[1]
    assert report.passed()
