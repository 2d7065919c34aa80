import numpy as np
import pytest

from effham.action import InitialDatum, TorusBump
from effham.homogenize import (
    Scenario,
    affine_datum_check,
    function_convergence_check,
    matching_bound,
    run_experiment,
    run_subcover_experiment,
)
from effham.mather import alpha_graph
from effham.model import TorusHamiltonian, TrigPolynomial
from effham.topology import SubcoverMap


LADDER3 = (1.0, 0.5, 0.25)


def test_function_convergence_affine_pullback_is_exact(circle, fig8_cover):
    report = function_convergence_check(InitialDatum.affine([0.7], 0.2), circle,
                                        [0.5, 0.25, 0.125], 1.0)
    assert report.passed()
    assert all(row.residual == 0.0 for row in report.rows)

    report = function_convergence_check(InitialDatum.affine([0.4, -0.3]),
                                        fig8_cover, [0.5, 0.25, 0.125], 1.0)
    assert report.passed()
    assert all(row.residual == 0.0 for row in report.rows)


def test_function_convergence_bump_residual_equals_scale(circle):
    bump = TorusBump(TrigPolynomial(1, [([1], 1.0, 0.0)]))
    ladder = [0.5, 0.25, 0.125]
    report = function_convergence_check(InitialDatum.affine([0.7], 0.2), circle,
                                        ladder, 1.0, bump=bump)
    for row, eps in zip(report.rows, ladder):
        assert row.residual == pytest.approx(eps, abs=1e-15)


def test_free_experiment_error_equals_matching(circle, free1):
    scenario = Scenario(name="free-line", cover=circle, model=free1,
                        datum=InitialDatum.affine([1.0], 0.25),
                        eps_ladder=LADDER3,
                        eval_points=(((1 / 3,), 1.0), ((-2 / 3,), 0.5)),
                        mesh=32, rate_rungs=3)
    report = run_experiment(scenario)
    assert report.passed
    assert report.monotone_ok and report.sandwich_ok
    for row in report.rows:
        assert row.abs_error == pytest.approx(row.match_error, abs=1e-12)
    assert report.rate_exponent == pytest.approx(1.0, abs=1e-6)


def test_experiment_reruns_are_identical(circle, free1):
    scenario = Scenario(name="free-line", cover=circle, model=free1,
                        datum=InitialDatum.affine([1.0], 0.25),
                        eps_ladder=LADDER3,
                        eval_points=(((1 / 3,), 1.0),),
                        mesh=32, rate_rungs=3)
    first = run_experiment(scenario)
    again = run_experiment(scenario)
    threaded = run_experiment(scenario, threads=2)
    assert first.to_json() == again.to_json()
    assert first.to_json() == threaded.to_json()


def test_pendulum_experiment_error_decreases(circle, pendulum):
    scenario = Scenario(name="pend-small", cover=circle, model=pendulum,
                        datum=InitialDatum.affine([0.0]),
                        eps_ladder=LADDER3,
                        eval_points=(((1 / 3,), 1.0),),
                        mesh=32, rate_rungs=3)
    report = run_experiment(scenario)
    assert report.monotone_ok
    errs = [v for _, v in report.errors_by_eps()]
    assert errs[-1] < errs[0]
    # flat datum: the limit is -alpha(0) t, error shrinks like eps
    assert errs[-1] == pytest.approx(errs[0] / 4.0, rel=0.1)


def test_figure_eight_cone_experiment(fig8_cover, fig8_lag):
    scenario = Scenario(name="fig8-small", cover=fig8_cover, model=fig8_lag,
                        datum=InitialDatum.cone(0.6, norm="l1", dim=2),
                        eps_ladder=LADDER3,
                        eval_points=(((1 / 3, -1 / 3), 1.0),),
                        mesh=32, rate_rungs=3)
    report = run_experiment(scenario)
    assert report.monotone_ok
    errs = [v for _, v in report.errors_by_eps()]
    # coarse rungs can wobble; the tolerance claim needs the full ladder
    assert errs[-1] < 0.5 * errs[0]


def test_affine_check_free_is_tight(circle, free1):
    report = affine_datum_check(circle, free1, [0.8], 0.1, [0.5, 0.25],
                                (((0.4,), 1.0),), alpha_value=0.32, mesh=32)
    assert report.passed
    assert all(row.deviation <= 1e-12 for row in report.rows)


def test_affine_check_constant_potential_invariance(circle):
    const = TorusHamiltonian.mechanical(TrigPolynomial.constant(1, -0.3))
    report = affine_datum_check(circle, const, [0.5], 0.0, [0.5, 0.25],
                                (((0.4,), 1.0),),
                                alpha_value=0.5 * 0.25 - 0.3, mesh=32)
    assert report.passed
    assert all(row.deviation <= 1e-12 for row in report.rows)


def test_affine_check_pendulum_linear_in_scale(circle, pendulum):
    ladder = [2.0 ** (-j) for j in range(7)]
    report = affine_datum_check(circle, pendulum, [0.0], 0.0, ladder,
                                (((1 / 3,), 1.0),), alpha_value=1.0)
    assert report.passed
    devs = report.deviations()
    for prev, nxt in zip(devs, devs[1:]):
        assert nxt == pytest.approx(prev / 2.0, rel=0.05)
    assert devs[-1] < 1e-2
    assert report.fitted_c == pytest.approx(devs[0], rel=0.05)


def test_identity_subcover_reproduces_plain_run(loop2_cover, loop2_lag):
    common = dict(cover=loop2_cover, model=loop2_lag,
                  datum=InitialDatum.affine([0.4]),
                  eps_ladder=(0.5, 0.25), eval_points=(((1 / 3,), 1.0),),
                  mesh=32, rate_rungs=2)
    quotient = run_subcover_experiment(
        Scenario(name="loop-ident", subcover=SubcoverMap([[1]]), **common))
    plain = run_experiment(Scenario(name="loop-plain", **common),
                           with_spaces=False)
    for qrow, prow in zip(quotient.rows, plain.rows):
        assert qrow.v_eps == pytest.approx(prow.v_eps, abs=1e-9)
    assert quotient.lift_identity_error <= 1e-9
    assert quotient.dual_limit_error <= 1e-3


def test_merged_loops_subcover_consistency(fig8_cover, fig8_lag, fig8):
    scenario = Scenario(name="fig8-merge", cover=fig8_cover, model=fig8_lag,
                        datum=InitialDatum.affine([0.5], 0.1),
                        eps_ladder=(1.0, 0.5), eval_points=(((0.8,), 1.0),),
                        mesh=32, rate_rungs=2, subcover=SubcoverMap([[1, 1]]))
    report = run_subcover_experiment(scenario, p_grid=[np.array([0.4])])

    # the quotient limit of an affine datum is affine with the pulled-back level
    closed = 0.1 + 0.5 * 0.8 - alpha_graph(fig8, fig8_lag, [0.5, 0.5]) * 1.0
    for row in report.rows:
        assert row.u_limit == pytest.approx(closed, abs=1e-6)
    assert report.lift_identity_error <= 1e-9 + matching_bound(
        fig8_cover, scenario.eps_ladder[-1], scenario.mesh)
    assert report.kernel_invariance_error <= 1e-8
    assert report.dual_limit_error <= 1e-3


def test_scenario_rejects_bad_ladder(circle, free1):
    with pytest.raises(ValueError):
        Scenario(name="bad", cover=circle, model=free1,
                 datum=InitialDatum.affine([0.0]),
                 eps_ladder=(0.25, 0.5), eval_points=(((0.0,), 1.0),))
    with pytest.raises(ValueError):
        Scenario(name="bad", cover=circle, model=free1,
                 datum=InitialDatum.affine([0.0]),
                 eps_ladder=(0.5, 0.25), eval_points=(((0.0,), 0.0),))


def test_scenario_rejects_mismatched_target(circle, free1):
    with pytest.raises(ValueError):
        Scenario(name="bad", cover=circle, model=free1,
                 datum=InitialDatum.affine([0.0]),
                 eps_ladder=(0.5,), eval_points=(((0.0, 0.0), 1.0),))
