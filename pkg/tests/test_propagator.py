#!/usr/bin/env python3
"""
Tests for the WKB start, boundary injection, shift bookkeeping and the
relaxation loop.
"""

import numpy as np
import pytest

from cpwm_solver.components import observables
from cpwm_solver.components.core import ConfigurationError, TurningPointError
from cpwm_solver.components.potential_models import ScatteringProblem, make_benchmark
from cpwm_solver.components.propagator import (
    RelaxationConfig,
    apply_boundary,
    complete_shift,
    correction_term,
    initial_state,
    relax_to_stationary,
    rhs_general,
    rhs_symmetric,
    step_rk4,
)
from cpwm_solver.components.trajectory_grid import build_grids, traversal_time


def short_run(problem: ScatteringProblem, shifts: int, N: int = 12, **kwargs) -> RelaxationConfig:
    t_shift = traversal_time(problem, 0) / (N - 1)
    options = {"integrator": "rk4", "steps_per_shift": 4, "stop_on_convergence": False, **kwargs}
    return RelaxationConfig(N=N, t_max=shifts * t_shift, **options)


def test_initial_state_is_pure_transmission(ramp_problem):
    """The WKB start carries unit flux to the right on surface 1 and nothing else."""
    state = initial_state(ramp_problem, build_grids(ramp_problem, 16))
    refl, trans = observables.edge_probabilities(state)
    assert trans[0] == pytest.approx(1.0, rel=1e-9)
    assert refl == [0.0]
    assert not np.any(state.component(0, -1).values)


def test_initial_state_two_surfaces(pure_coupling_problem):
    state = initial_state(pure_coupling_problem, build_grids(pure_coupling_problem, 10))
    result = observables.probabilities(state)
    assert result.P_trans == pytest.approx([1.0, 0.0])
    assert result.P_refl == [0.0, 0.0]
    assert state.component(0, 1).values[0] == pytest.approx(1.0)


def test_initial_state_checks(ramp_problem):
    grids = build_grids(ramp_problem, 8)
    with pytest.raises(ConfigurationError):
        initial_state(ramp_problem, grids, "phase_modified")
    with pytest.raises(ConfigurationError):
        initial_state(ramp_problem, grids[:1])
    with pytest.raises(ConfigurationError):
        initial_state(ramp_problem, grids, "explicit")


def test_pinned_value_phase(eckart_problem):
    state = initial_state(eckart_problem, build_grids(eckart_problem, 8))
    energy = eckart_problem.energy
    assert state.pinned_value() == pytest.approx(1.0)
    assert state.pinned_value(100.0) == pytest.approx(np.exp(-1j * energy * 100.0))

    modified = initial_state(eckart_problem, build_grids(eckart_problem, 8), "phase_modified")
    assert modified.pinned_value(100.0) == pytest.approx(np.exp(-2j * energy * 100.0))


def test_apply_boundary(pure_coupling_problem):
    state = initial_state(pure_coupling_problem, build_grids(pure_coupling_problem, 8))
    for component in state.components:
        component.values[:] = 0.5 + 0.5j
    state.t = 123.0
    apply_boundary(state)

    assert state.component(0, 1).values[0] == pytest.approx(np.exp(-1j * pure_coupling_problem.energy * 123.0))
    assert state.component(1, 1).values[0] == 0.0
    assert state.component(0, -1).values[-1] == 0.0
    assert state.component(1, -1).values[-1] == 0.0
    assert state.component(0, -1).values[0] == 0.5 + 0.5j


def test_complete_shift_moves_values(eckart_problem):
    state = initial_state(eckart_problem, build_grids(eckart_problem, 8))
    state.component(0, -1).values[:] = np.arange(8)
    plus_before = state.component(0, 1).values.copy()

    shifted = complete_shift(state)
    assert shifted.shifts == 1
    assert shifted.t == pytest.approx(state.t_shift)
    np.testing.assert_array_equal(shifted.component(0, 1).values[1:], plus_before[:-1])
    np.testing.assert_array_equal(shifted.component(0, -1).values[:-1], np.arange(1, 8))
    assert shifted.component(0, -1).values[-1] == 0.0
    assert shifted.component(0, 1).values[0] == pytest.approx(np.exp(-1j * eckart_problem.energy * shifted.t))


def test_rk4_step_may_not_cross_shift(eckart_problem):
    state = initial_state(eckart_problem, build_grids(eckart_problem, 8))
    with pytest.raises(ConfigurationError):
        step_rk4(state, 1.5 * state.t_shift)

    half = step_rk4(state, 0.5 * state.t_shift)
    assert half.shifts == 0
    assert half.tau == pytest.approx(0.5 * state.t_shift)
    full = step_rk4(half, 0.5 * state.t_shift)
    assert full.shifts == 1 and full.tau == 0.0


def test_free_evolution_keeps_plane_wave(free_problem):
    """With no potential the components stay plane waves with unit transmission."""
    result, state = relax_to_stationary(free_problem, short_run(free_problem, 15))
    assert result.P_refl == [0.0]
    assert result.P_trans[0] == pytest.approx(1.0, abs=1e-5)
    np.testing.assert_allclose(np.abs(state.component(0, 1).values), 1.0, atol=1e-5)


def test_free_evolution_continuity(free_problem):
    grids = build_grids(free_problem, 12)
    before = initial_state(free_problem, grids)
    after = before
    for _ in range(4):
        after = step_rk4(after, 0.25 * before.t_shift)
    assert observables.continuity_residual(before, after) < 1e-5


def test_free_evolution_continuity_with_midpoint(free_problem):
    before = initial_state(free_problem, build_grids(free_problem, 12))
    states = [before]
    for _ in range(8):
        states.append(step_rk4(states[-1], 0.25 * before.t_shift))
    middle, after = states[4], states[8]
    assert middle.shifts == 1 and after.shifts == 2
    assert observables.continuity_residual(before, after, middle=middle) < 1e-5
    with pytest.raises(ConfigurationError):
        observables.continuity_residual(before, after, middle=states[3])


def test_zero_coupling_leaves_second_surface_empty():
    problem = ScatteringProblem(
        make_benchmark("pure_coupling", {"coupling": 0.0}), 4.556335e-4, -3.0, 3.0
    )
    result, state = relax_to_stationary(problem, short_run(problem, 6, N=10, integrator="cash_karp", epsilon=1e-6))
    assert not np.any(state.component(1, 1).values)
    assert not np.any(state.component(1, -1).values)
    assert result.P_refl == [0.0, 0.0]
    assert result.P_trans[1] == 0.0
    assert result.P_trans[0] == pytest.approx(1.0, abs=1e-5)


def test_phase_modified_matches_general_scheme(pure_coupling_problem):
    general, _ = relax_to_stationary(pure_coupling_problem, short_run(pure_coupling_problem, 8, N=10))
    modified, _ = relax_to_stationary(
        pure_coupling_problem, short_run(pure_coupling_problem, 8, N=10, scheme="phase_modified")
    )
    assert len(general.history) == len(modified.history)
    for a, b in zip(general.history, modified.history):
        for key in ("P1_refl", "P2_refl", "P1_trans", "P2_trans"):
            assert a[key] == pytest.approx(b[key], abs=1e-5)
    assert general.P_trans[1] > 0.0


def test_phase_modified_rejects_asymmetric_problem(ramp_problem):
    config = short_run(ramp_problem, 2, scheme="phase_modified")
    with pytest.raises(ConfigurationError):
        relax_to_stationary(ramp_problem, config)


def test_symmetric_rates_need_symmetric_problem(ramp_problem, pure_coupling_problem):
    state = initial_state(pure_coupling_problem, build_grids(pure_coupling_problem, 8), "phase_modified")
    rates = rhs_symmetric(state)
    assert len(rates) == 4
    # surface 1 only feeds surface 2 through the coupling
    assert not np.any(rates[0])
    assert np.any(rates[2])

    asymmetric = initial_state(ramp_problem, build_grids(ramp_problem, 8))
    with pytest.raises(ConfigurationError):
        rhs_symmetric(asymmetric)
    assert len(rhs_general(asymmetric)) == 2


def test_correction_term_vanishes_for_flat_potential(free_problem, ramp_problem):
    x = np.linspace(-1.0, 1.0, 5)
    np.testing.assert_array_equal(correction_term(free_problem, 0, x), 0.0)
    assert np.all(np.isfinite(correction_term(ramp_problem, 0, x)))
    assert np.any(correction_term(ramp_problem, 0, x) != 0.0)


def test_turning_point_stops_relaxation():
    problem = ScatteringProblem(make_benchmark("uphill_ramp"), 0.0015, -1.5, 2.2)
    with pytest.raises(TurningPointError):
        relax_to_stationary(problem, RelaxationConfig(N=10, t_max=100.0))


def test_relaxation_config_validation():
    with pytest.raises(ConfigurationError):
        RelaxationConfig(N=10, t_max=10.0, integrator="euler")
    with pytest.raises(ConfigurationError):
        RelaxationConfig(N=3, t_max=10.0)
    with pytest.raises(ConfigurationError):
        RelaxationConfig(N=10, t_max=10.0, delta=-1.0)
    with pytest.raises(ConfigurationError):
        RelaxationConfig(N=10, t_max=-1.0)


def test_delta_sets_steps_per_shift(eckart_problem):
    t_shift = traversal_time(eckart_problem, 0) / 9
    config = RelaxationConfig(N=10, t_max=2 * t_shift, integrator="rk4", delta=t_shift / 3.0, stop_on_convergence=False)
    result, state = relax_to_stationary(eckart_problem, config)
    assert result.diagnostics["steps_per_shift"] == 3
    assert result.diagnostics["delta"] == pytest.approx(t_shift / 3.0)
    assert state.shifts == 2
    assert [row["t"] for row in result.history] == pytest.approx([0.0, t_shift, 2 * t_shift])


def test_snapshot_callback_cadence(eckart_problem):
    seen = []
    config = short_run(eckart_problem, 6, N=8, snapshot_every=2)
    relax_to_stationary(eckart_problem, config, on_snapshot=lambda s: seen.append(s.shifts))
    assert seen == [0, 2, 4, 6]


def test_cash_karp_diagnostics(eckart_problem):
    config = short_run(eckart_problem, 3, N=8, integrator="cash_karp", epsilon=1e-6)
    result, _ = relax_to_stationary(eckart_problem, config)
    diagnostics = result.diagnostics
    assert diagnostics["integrator"] == "cash_karp"
    assert diagnostics["shifts"] == 3
    assert diagnostics["accepted_steps"]
    assert max(diagnostics["accepted_steps"]) <= diagnostics["t_shift"] * (1 + 1e-12)
    assert not result.converged

