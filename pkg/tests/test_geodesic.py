import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from geothermo.geodesic import (COMPLETE, INCOMPLETE, OTHER, GeodesicOptions, GeodesicProblem,
                                InvalidInitialState, Termination, affine_norm, geodesic_rhs,
                                incompleteness_report, integrate, shoot_batch, vdw_problem)
from geothermo.geometry import MetricField
from geothermo.vdw import VdwParams, locus_residual, vdw_metric_closed
from oracles import euler_lagrange_acceleration, sphere_metric_z, vdw_metric_hand

EUCLID = MetricField.diagonal(("x", "y"), [1, 1])
SPHERE = MetricField.diagonal(("z", "phi"), ["1/(1 - z^2)", "1 - z^2"])
UNIT = VdwParams(1, 1, 1)
LIGHT_REPULSION = VdwParams(1, 0.05, 1)


def flat(position, velocity, tau=1.0, **kw):
    return GeodesicProblem(EUCLID, position, velocity, GeodesicOptions(tau_max=tau, **kw))


def great_circle(tau=2 * math.pi, **kw):
    # tilted great circle through the equator, never near the poles
    return GeodesicProblem(SPHERE, (0.0, 0.0), (0.6, 0.8), GeodesicOptions(tau_max=tau, **kw))


def drift(problem, traj):
    n = affine_norm(problem, traj)
    return float(np.max(np.abs(n - n[0])) / abs(n[0]))


# ----------------------------------------------------------------------- rhs


def test_rhs_flat_has_no_acceleration():
    assert np.array_equal(geodesic_rhs(EUCLID, (1.0, -2.0, 0.3, 4.0)), [0.3, 4.0, 0, 0])


def test_rhs_sphere_equator():
    out = geodesic_rhs(SPHERE, (0.0, 1.0, 0.0, 1.0))
    assert np.array_equal(out, [0.0, 1.0, 0.0, 0.0])


def test_rhs_sphere_off_equator_matches_oracle():
    state = (0.4, 0.0, 0.2, 1.3)
    acc = geodesic_rhs(SPHERE, state)[2:]
    ref = euler_lagrange_acceleration(sphere_metric_z, state[:2], np.array(state[2:]))
    assert np.allclose(acc, ref, rtol=1e-7)


def test_rhs_vdw_matches_euler_lagrange_oracle():
    g = vdw_metric_closed(UNIT)
    acc = geodesic_rhs(g, (2.0, 3.0, 0.0, 1.0))[2:]
    ref = euler_lagrange_acceleration(lambda x: vdw_metric_hand(*x, 1, 1, 1), (2.0, 3.0),
                                      np.array([0.0, 1.0]))
    assert np.allclose(acc, ref, rtol=1e-5, atol=0)


def test_rhs_with_symbolic_parameters():
    g = vdw_metric_closed(None)
    a = geodesic_rhs(g, (2.0, 3.0, 0.5, 1.0), {"a": 1, "b": 1, "Lambda": 1})
    b = geodesic_rhs(vdw_metric_closed(UNIT), (2.0, 3.0, 0.5, 1.0))
    assert np.allclose(a, b, rtol=1e-12)
    with pytest.raises(InvalidInitialState):
        geodesic_rhs(g, (2.0, 3.0, 0.5, 1.0))


# ------------------------------------------------------------------- options


def test_options_validation():
    with pytest.raises(ValueError):
        GeodesicOptions(rtol=0)
    with pytest.raises(ValueError):
        GeodesicOptions(atol=-1)
    with pytest.raises(ValueError):
        GeodesicOptions(tau_max=0)


def test_problem_shape_validation():
    with pytest.raises(ValueError):
        GeodesicProblem(EUCLID, (0.0,), (1.0, 2.0))


def test_invalid_initial_state_outside_domain():
    with pytest.raises(InvalidInitialState):
        integrate(vdw_problem(UNIT, 2.0, 0.5))


def test_invalid_initial_state_on_singular_locus():
    with pytest.raises(InvalidInitialState):
        integrate(vdw_problem(UNIT, 1 / 9, 3.0))


# ---------------------------------------------------------------- integrator


def test_flat_straight_line():
    traj = integrate(flat((0.0, 0.0), (1.0, 2.0)))
    assert traj.termination is Termination.MAX_TAU
    assert traj.tau_end == 1.0
    assert np.abs(np.array(traj.endpoint) - [1.0, 2.0]).max() < 1e-9
    assert np.all(np.diff(traj.tau) > 0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=2, max_size=2),
       st.lists(st.floats(-10, 10), min_size=2, max_size=2), st.floats(0.1, 5))
def test_flat_geodesics_are_straight(x0, v0, tau):
    traj = integrate(flat(x0, v0, tau))
    expected = np.array(x0) + tau * np.array(v0)
    assert np.abs(np.array(traj.endpoint) - expected).max() < 1e-9 * max(1, np.abs(expected).max())
    # every sample lies on the line
    resid = traj.position - (np.array(x0) + np.outer(traj.tau, v0))
    assert np.abs(resid).max() < 1e-9 * max(1, np.abs(expected).max())


def test_sphere_equator_closes():
    traj = integrate(GeodesicProblem(SPHERE, (0.0, 0.0), (0.0, 1.0),
                                     GeodesicOptions(tau_max=2 * math.pi)))
    assert np.abs(np.array(traj.endpoint) - [0.0, 2 * math.pi]).max() < 1e-5


def test_sphere_great_circle_closes():
    problem = great_circle()
    traj = integrate(problem)
    assert traj.termination is Termination.MAX_TAU
    assert np.abs(np.array(traj.endpoint) - [0.0, 2 * math.pi]).max() < 1e-5
    assert np.abs(traj.velocity[-1] - [0.6, 0.8]).max() < 1e-5
    # z(tau) = 0.6 sin(tau) on this circle
    assert np.abs(traj.position[:, 0] - 0.6 * np.sin(traj.tau)).max() < 1e-6


@pytest.mark.parametrize("make", [lambda: flat((1.0, 2.0), (-0.3, 0.7), 3.0),
                                  lambda: great_circle(4.0)], ids=["flat", "sphere"])
def test_time_reversal(make):
    problem = make()
    fwd = integrate(problem)
    back = integrate(GeodesicProblem(problem.metric, fwd.endpoint, -fwd.velocity[-1],
                                     problem.options))
    assert np.abs(np.array(back.endpoint) - problem.position).max() < 1e-5


def test_affine_norm_conserved():
    for problem in [flat((0.0, 0.0), (1.0, 2.0), 5.0), great_circle(),
                    vdw_problem(UNIT, 2.0, 3.0, 0.0, 1.0, GeodesicOptions(tau_max=2.0))]:
        traj = integrate(problem)
        assert drift(problem, traj) < 1e-6


def test_affine_norm_drift_tightens_with_tolerance():
    drifts = []
    for rtol in (1e-7, 1e-8, 1e-9, 1e-10):
        problem = vdw_problem(UNIT, 60.0, 0.1, options=GeodesicOptions(rtol=rtol, atol=rtol / 100),
                              enforce_domain=False)
        drifts.append(drift(problem, integrate(problem)))
    assert all(b < a for a, b in zip(drifts, drifts[1:]))
    assert drifts[-1] < 1e-7


def test_convergence_with_tolerance():
    ref = integrate(great_circle(5.0, rtol=1e-13, atol=1e-15)).endpoint
    errors = []
    for rtol in (1e-4, 1e-5, 1e-6, 1e-7, 1e-8):
        end = integrate(great_circle(5.0, rtol=rtol, atol=rtol / 100)).endpoint
        errors.append(np.abs(np.array(end) - ref).max())
    assert all(b < a for a, b in zip(errors, errors[1:]))
    # controlled local error ~ tol; global error drops about a decade per decade
    assert errors[0] / errors[-1] > 1e2


def test_matches_independent_solver():
    """Endpoint agrees with scipy's DOP853 on finite-difference accelerations."""
    def hand(x):
        return vdw_metric_hand(*x, 1, 1, 1)

    def f(t, y):
        return np.concatenate([y[2:], euler_lagrange_acceleration(hand, y[:2], y[2:])])

    y0 = [2.0, 3.0, 0.3, 1.0]
    sol = solve_ivp(f, (0, 1.5), y0, method="DOP853", rtol=1e-11, atol=1e-13)
    traj = integrate(vdw_problem(UNIT, 2.0, 3.0, 0.3, 1.0,
                                 GeodesicOptions(tau_max=1.5, rtol=1e-11, atol=1e-13)))
    assert traj.termination is Termination.MAX_TAU
    assert np.allclose(traj.endpoint, sol.y[:2, -1], rtol=1e-7)


def test_deterministic_bitwise():
    a = integrate(great_circle(3.0))
    b = integrate(great_circle(3.0))
    assert np.array_equal(a.tau, b.tau) and np.array_equal(a.position, b.position)
    assert np.array_equal(a.velocity, b.velocity)


def test_rows_layout():
    traj = integrate(flat((0.0, 0.0), (1.0, 2.0)))
    rows = list(traj.rows())
    assert rows[0] == (0.0, 0.0, 0.0, 1.0, 2.0)
    assert len(rows) == len(traj.tau)


def test_max_steps_termination():
    traj = integrate(GeodesicProblem(SPHERE, (0.0, 0.0), (0.6, 0.8),
                                     GeodesicOptions(tau_max=50.0, max_steps=5)))
    assert traj.termination is Termination.MAX_STEPS
    assert traj.accepted_steps == 5


# ----------------------------------------------------------- van der Waals


def test_singular_boundary_stop_satisfies_locus():
    # a = b = 1, the chart of the entropy relaxed so the metric continues past V = b
    problem = vdw_problem(UNIT, 20.0, 0.1, enforce_domain=False)
    traj = integrate(problem)
    assert traj.termination is Termination.SINGULAR_BOUNDARY
    assert traj.tau_end < problem.options.tau_max
    rep = incompleteness_report(traj, UNIT)
    assert rep.classification == INCOMPLETE
    assert rep.residual < 1e-4
    # the guard stops where the boundary polynomial has fallen to ~1e-6 of its start
    ratio = traj.detail["denominator"] / traj.detail["initial_denominator"]
    assert ratio == pytest.approx(problem.options.guard_ratio, rel=0.1)


def test_light_repulsion_single_start_terminates_early():
    # a = 1, b = 0.05, V(0) = 0.1, U(0) = 10: the geodesic runs off to infinity
    # in finite affine time rather than reaching the phase boundary
    problem = vdw_problem(LIGHT_REPULSION, 10.0, 0.1)
    traj = integrate(problem)
    assert traj.tau_end < problem.options.tau_max
    assert traj.termination is Termination.DOMAIN_EXIT
    assert max(abs(x) for x in traj.endpoint) > 1e11
    assert incompleteness_report(traj, LIGHT_REPULSION).classification == OTHER


def test_domain_exit_stops_at_last_valid_sample():
    problem = GeodesicProblem(EUCLID, (0.0, 0.0), (1.0, 0.0), GeodesicOptions(tau_max=5.0),
                              positivity=("1 - x",))
    traj = integrate(problem)
    assert traj.termination is Termination.DOMAIN_EXIT
    assert np.all(traj.position[:, 0] < 1)
    assert traj.tau_end < 1


def test_every_sample_is_regular():
    problem = vdw_problem(UNIT, 60.0, 0.1, enforce_domain=False)
    traj = integrate(problem)
    for U, V in traj.position:
        assert locus_residual(UNIT, U, V) > 0


# ------------------------------------------------------------------ reports


class _Stub:
    def __init__(self, end, term, tau=1.0):
        self.endpoint = end
        self.termination = term
        self.tau_end = tau


def test_report_on_locus_point():
    rep = incompleteness_report(_Stub((1 / 9, 3.0), Termination.SINGULAR_BOUNDARY), UNIT)
    assert rep.residual < 1e-15
    assert rep.classification == INCOMPLETE
    assert rep.as_dict()["termination"] == "singular-boundary"


def test_report_residual_formula():
    rep = incompleteness_report(_Stub((2.0, 3.0), Termination.SINGULAR_BOUNDARY), UNIT)
    assert rep.residual == pytest.approx(51 / 54, rel=1e-15)
    assert rep.classification == OTHER


def test_report_flat_complete():
    traj = integrate(flat((0.0, 0.0), (1.0, 1.0)))
    rep = incompleteness_report(traj, None)
    assert rep.classification == COMPLETE and rep.residual is None


def test_report_tolerance_is_configurable():
    stub = _Stub((0.12, 3.0), Termination.SINGULAR_BOUNDARY)
    r = incompleteness_report(stub, UNIT).residual
    assert incompleteness_report(stub, UNIT, tolerance=r / 2).classification == OTHER
    assert incompleteness_report(stub, UNIT, tolerance=r * 2).classification == INCOMPLETE


# -------------------------------------------------------------------- batch


def _template():
    return vdw_problem(UNIT, 0.0, 0.1, enforce_domain=False)


def test_batch_single_item_matches_direct_call():
    [item] = shoot_batch(_template(), [40.0], UNIT)
    direct = integrate(vdw_problem(UNIT, 40.0, 0.1, enforce_domain=False))
    assert np.array_equal(item.trajectory.position, direct.position)
    assert np.array_equal(item.trajectory.tau, direct.tau)
    assert item.report == incompleteness_report(direct, UNIT)


def test_batch_order_and_permutation():
    values = [20.0, 80.0, 140.0, 50.0]
    out = shoot_batch(_template(), values, UNIT, workers=4)
    assert [i.u0 for i in out] == values
    perm = [values[k] for k in (2, 0, 3, 1)]
    out2 = shoot_batch(_template(), perm, UNIT)
    by_u0 = {i.u0: i for i in out}
    for item in out2:
        assert np.array_equal(item.trajectory.position, by_u0[item.u0].trajectory.position)


def test_batch_records_errors_and_continues():
    out = shoot_batch(vdw_problem(UNIT, 0.0, 3.0), [1 / 9, 2.0], UNIT)
    assert out[0].error and out[0].trajectory is None
    assert out[1].error is None and out[1].trajectory is not None


def test_batch_empty():
    assert shoot_batch(_template(), [], UNIT) == []


def test_relaxed_sweep_stops_at_phase_boundary():
    # every singular-boundary stop of the sweep satisfies the locus relation
    out = shoot_batch(_template(), [float(u) for u in range(20, 141, 20)], UNIT, workers=4)
    for item in out:
        assert item.report.termination is Termination.SINGULAR_BOUNDARY
        assert item.report.classification == INCOMPLETE
        assert item.report.residual < 1e-2
