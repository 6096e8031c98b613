import math

import numpy as np
import pytest

import torusflow as tf
from torusflow import flow
from torusflow.flow import FlowProblem, SliceTrajectory, cfl_timestep, slice_ode_solve


@pytest.fixture(scope="module")
def cosh_unit():
    return tf.build_profile(tf.parse("cosh(u)"), (-1.0, 1.0), anchor=0.0)


# -- right-hand sides -----------------------------------------------------------

def test_rhs_product_constant_zero_data(grid64):
    out = tf.rhs_product(grid64.field(0.7), tf.parse("0"), tf.parse("0"))
    np.testing.assert_array_equal(out.values, np.zeros(64))


def test_rhs_product_stationary_slice(grid64):
    # h(u*) + g(x, u*) = 0 with Du = 0 -> rhs = 0
    h = tf.parse("1 - u")
    g = tf.parse("0")
    out = tf.rhs_product(grid64.field(1.0), h, g)
    np.testing.assert_allclose(out.values, 0.0, atol=1e-15)


def test_rhs_product_sine(grid256):
    x = grid256.coords()[0]
    out = tf.rhs_product(grid256.field(np.sin(x)), tf.parse("0"), tf.parse("0"))
    exact = -np.sin(x) / (1 + np.cos(x) ** 2)
    assert np.abs(out.values - exact).max() < 2e-4


def test_rhs_weighted_geodesic_slice_is_stationary(grid64, cosh_unit):
    # phi'(0) = 0: the zero slice kills both terms
    state = grid64.field(cosh_unit.transform(0.0))
    out = tf.rhs_weighted(state, cosh_unit)
    np.testing.assert_allclose(out.values, 0.0, atol=1e-14)


def test_rhs_weighted_constant_matches_slice_ode(grid64, cosh_unit):
    r0 = 0.4
    state = grid64.field(float(cosh_unit.transform(r0)))
    out = tf.rhs_weighted(state, cosh_unit)
    # omega = 1: d phi/dt = -n phi'(r0); n = 1
    np.testing.assert_allclose(out.values, -math.sinh(r0), atol=1e-10)


def test_rhs_weighted_unit_warp_is_graphical_mcf(grid64):
    prof = tf.build_profile(tf.parse("1"), (-2.0, 2.0), anchor=0.0)
    x = grid64.coords()[0]
    state = grid64.field(0.3 * np.sin(x))
    out = tf.rhs_weighted(state, prof)
    du = tf.gradient(state)
    omega = tf.area_element(du, grid64).values
    contraction = tf.mean_curvature(state).values * omega
    np.testing.assert_allclose(out.values, contraction / omega, atol=1e-12)


def test_rhs_weighted_out_of_chart_names_node(grid64, cosh_unit):
    values = np.full(64, 0.1)
    values[17] = 5.0
    with pytest.raises(tf.DomainError, match="node 17"):
        tf.rhs_weighted(grid64.field(values), cosh_unit)


# -- stepping ---------------------------------------------------------------------

def test_step_zero_rhs_is_identity(grid64):
    problem = FlowProblem.product(grid64, tf.parse("0"), tf.parse("0"), grid64.field(0.25))
    out = tf.step(grid64.field(0.25), problem, dt=1e-3)
    np.testing.assert_array_equal(out.values, np.full(64, 0.25))


def test_step_requires_positive_dt(grid64):
    problem = FlowProblem.product(grid64, tf.parse("0"), tf.parse("0"), grid64.field(0.0))
    with pytest.raises(flow.FlowError):
        tf.step(grid64.field(0.0), problem, dt=0.0)


def test_rk2_is_second_order(grid64):
    # integrate to a fixed horizon with dt and dt/2; the error vs a fine
    # reference drops ~4x
    x = grid64.coords()[0]
    problem = FlowProblem.product(grid64, tf.parse("0"), tf.parse("0"),
                                  grid64.field(np.sin(x)))
    horizon = 0.25

    def integrate_with(dt_steps):
        dt = horizon / dt_steps
        state = problem.initial.copy()
        ws = problem.workspace()
        vals = state.flat.copy()
        ws.advance(vals, dt_steps, dt)
        return vals

    ref = integrate_with(4096)
    err1 = np.abs(integrate_with(64) - ref).max()
    err2 = np.abs(integrate_with(128) - ref).max()
    assert 3.5 < err1 / err2 < 4.5


def test_cfl_formula():
    g = tf.PeriodicGrid(1, 64)
    assert cfl_timestep(g, 0.4) == pytest.approx(0.4 * (2 * np.pi / 64) ** 2 / 2)
    g2 = tf.PeriodicGrid(2, 16, metric=np.diag([4.0, 1.0]))
    lam = 1.0  # inverse metric eigenvalues: 1/4 and 1
    assert cfl_timestep(g2, 0.4) == pytest.approx(0.4 * (2 * np.pi / 16) ** 2 / (2 * 2 * lam))


@pytest.mark.parametrize("res", [64, 128, 256])
def test_stability_sweep_weighted_cosh(res, cosh_unit):
    # 1e5 steps at cfl 0.4 stay finite on the weighted cosh problem
    grid = tf.PeriodicGrid(1, res)
    x = grid.coords()[0]
    problem = FlowProblem.weighted(grid, cosh_unit, -1.0, 1.0,
                                   grid.field(0.5 + 0.3 * np.sin(x)))
    state = problem.initial.flat.copy()
    status = problem.workspace().advance(state, 100_000, cfl_timestep(grid, 0.4))
    assert status == 0
    assert np.all(np.isfinite(state))


# -- runs ---------------------------------------------------------------------------

def test_already_stationary_terminates_immediately(grid64, cosh_unit):
    problem = FlowProblem.weighted(grid64, cosh_unit, -1.0, 1.0, grid64.field(0.0))
    trace = tf.run_to_stationary(problem, tol=1e-8)
    assert trace.termination == "stationary"
    assert trace.steps == 0
    assert len(trace.times) == 1


def test_linear_reaction_run_converges(grid64):
    x = grid64.coords()[0]
    problem = FlowProblem.product(grid64, tf.parse("-u"), tf.parse("0"),
                                  grid64.field(0.3 + 0.1 * np.sin(x)), slab=(-1, 1))
    trace = tf.run_to_stationary(problem, tol=1e-8, t_max=100.0)
    assert trace.termination == "stationary"
    assert np.abs(trace.final.values).max() < 1e-6
    assert np.all(np.diff(trace.times) > 0)
    assert np.all(np.diff(trace.cumulative_dissipation) >= 0)


def test_max_time_termination(grid64):
    x = grid64.coords()[0]
    problem = FlowProblem.product(grid64, tf.parse("-u"), tf.parse("0"),
                                  grid64.field(0.3 + 0.1 * np.sin(x)), slab=(-1, 1))
    trace = tf.run_to_stationary(problem, tol=1e-12, t_max=0.05)
    assert trace.termination == "max_time"


def test_divergence_detection(grid64):
    # runaway reaction blows past the omega guard
    x = grid64.coords()[0]
    problem = FlowProblem.product(grid64, tf.parse("25*u"), tf.parse("0"),
                                  grid64.field(0.5 + 0.2 * np.sin(x)))
    trace = tf.run_to_stationary(problem, tol=1e-10, t_max=50.0)
    assert trace.termination == "diverged"


def test_initial_field_must_sit_inside_slab(grid64):
    with pytest.raises(flow.FlowError, match="strictly inside"):
        FlowProblem.product(grid64, tf.parse("-u"), tf.parse("0"),
                            grid64.field(1.5), slab=(-1, 1))


def test_weighted_initial_must_sit_inside_domain(grid64, cosh_unit):
    with pytest.raises(flow.FlowError, match="strictly inside"):
        FlowProblem.weighted(grid64, cosh_unit, -1.0, 1.0, grid64.field(1.0))


# -- energy ledger ---------------------------------------------------------------

def test_energy_is_area_for_unit_weights(grid64):
    w = tf.build_weights(tf.parse("0"), tf.parse("0"), grid64, anchor=0.0, span=(-1, 1))
    assert tf.energy(grid64.field(0.3), w) == pytest.approx(2 * np.pi)


def test_dissipation_flat_graph(grid64):
    # u constant: omega = 1, D = integral of s * rhs^2
    h = tf.parse("-u")
    w = tf.build_weights(h, tf.parse("0"), grid64, anchor=0.0, span=(-1, 1))
    c = 0.25
    ut = grid64.field(float(h.evaluate(u=c)))
    expected = float(w.s(c)) * c**2 * 2 * np.pi
    assert tf.dissipation(grid64.field(c), ut, w) == pytest.approx(expected, rel=1e-12)


def test_discrete_dissipation_identity(grid64):
    # dE/dt + D = 0 up to discretization error along a product run
    x = grid64.coords()[0]
    problem = FlowProblem.product(grid64, tf.parse("-u"), tf.parse("0"),
                                  grid64.field(0.3 + 0.1 * np.sin(x)), slab=(-1, 1))
    trace = tf.run_to_stationary(problem, tol=1e-8, t_max=100.0)
    de = np.diff(trace.energy) / np.diff(trace.times)
    dm = 0.5 * (trace.dissipation[:-1] + trace.dissipation[1:])
    resid = np.abs(de + dm)[5:]
    assert resid.mean() < 0.05 * max(dm[5:].mean(), 1e-12)


def test_energy_decreases_monotonically(grid64):
    x = grid64.coords()[0]
    problem = FlowProblem.product(grid64, tf.parse("-u"), tf.parse("0"),
                                  grid64.field(0.3 + 0.1 * np.sin(x)), slab=(-1, 1))
    trace = tf.run_to_stationary(problem, tol=1e-8, t_max=100.0)
    assert np.all(np.diff(trace.energy) <= 1e-12)


# -- stationary-set agreement -------------------------------------------------------

def test_omega_factor_does_not_move_zeros(grid64, cosh_unit):
    x = grid64.coords()[0]
    problem = FlowProblem.weighted(grid64, cosh_unit, -1.0, 1.0,
                                   grid64.field(0.4 + 0.2 * np.sin(x)))
    tol = 1e-8
    trace = tf.run_to_stationary(problem, tol=tol, t_max=100.0)
    assert trace.termination == "stationary"
    final = trace.final
    with_omega = tf.rhs_weighted(final, cosh_unit).values
    omega = tf.area_element(tf.gradient(final), grid64).values
    without_omega = with_omega * omega
    assert np.abs(with_omega).max() < 10 * tol
    assert np.abs(without_omega).max() < 10 * tol


# -- the slice ODE ---------------------------------------------------------------------

def test_slice_ode_equilibrium(cosh_unit):
    traj = slice_ode_solve(cosh_unit, 0.0, t_end=1.0, dt=1e-3)
    assert isinstance(traj, SliceTrajectory)
    np.testing.assert_allclose(traj.values, 0.0, atol=1e-15)


def test_slice_ode_closed_form():
    prof = tf.build_profile(tf.parse("cosh(u)"), (-1.0, 1.0), anchor=0.0)
    traj = slice_ode_solve(prof, 0.5, t_end=1.0, dt=1e-3, n=2)
    # separation of variables: tanh(r/2) = tanh(r0/2) exp(-n t)
    exact = 2 * math.atanh(math.tanh(0.25) * math.exp(-2.0))
    assert exact == pytest.approx(0.0663165668, abs=1e-9)
    assert traj.final == pytest.approx(exact, abs=1e-8)


def test_slice_ode_odd_symmetry():
    prof = tf.build_profile(tf.parse("cosh(u)"), (-1.0, 1.0), anchor=0.0)
    plus = slice_ode_solve(prof, 0.5, t_end=1.0, dt=1e-3, n=2)
    minus = slice_ode_solve(prof, -0.5, t_end=1.0, dt=1e-3, n=2)
    np.testing.assert_allclose(minus.values, -plus.values, atol=1e-14)


def test_slice_ode_domain_guard(cosh_unit):
    with pytest.raises(tf.DomainError):
        slice_ode_solve(cosh_unit, 1.5, t_end=1.0, dt=1e-3)
