#!/usr/bin/env python3
"""
Tests for probabilities, fluxes, coupling rates and the Stückelberg diagnostics.
"""

import math

import numpy as np
import pytest

from cpwm_solver.components import observables
from cpwm_solver.components.core import ConfigurationError
from cpwm_solver.components.propagator import RelaxationConfig, initial_state, relax_to_stationary
from cpwm_solver.components.trajectory_grid import build_grids, traversal_time


@pytest.fixture
def coupled_state(pure_coupling_problem):
    """Pure-coupling state a few shifts in, with both surfaces populated."""
    t_shift = traversal_time(pure_coupling_problem, 0) / 9
    config = RelaxationConfig(
        N=10, t_max=5 * t_shift, integrator="rk4", steps_per_shift=2, stop_on_convergence=False
    )
    _, state = relax_to_stationary(pure_coupling_problem, config)
    return state


def test_scattering_result():
    result = observables.ScatteringResult(P_refl=[0.2, 0.1], P_trans=[0.3, 0.4], converged=True)
    assert result.nsurf == 2
    assert result.unitarity_defect == pytest.approx(0.0, abs=1e-15)
    data = result.to_dict()
    assert data["source"] == "cpwm"
    assert data["P_trans"] == [0.3, 0.4]


def test_history_row_columns():
    row = observables.history_row(5.0, [0.1, 0.2], [0.3, 0.4])
    assert list(row) == ["t", "P1_refl", "P2_refl", "P1_trans", "P2_trans"]


def test_flux_and_edge_probabilities_agree(ramp_problem):
    state = initial_state(ramp_problem, build_grids(ramp_problem, 16))
    assert observables.flux_probabilities(state) == pytest.approx(observables.edge_probabilities(state))

    x, flux = observables.component_flux(state, "1+")
    assert x.shape == flux.shape
    np.testing.assert_allclose(flux, ramp_problem.velocity(0, -1.5), rtol=1e-10)


def test_total_flux_is_uniform_for_wkb_start(ramp_problem):
    state = initial_state(ramp_problem, build_grids(ramp_problem, 16))
    _, total = observables.total_flux_profile(state)
    np.testing.assert_allclose(total, 1.0, rtol=1e-10)


def test_probabilities_rejects_foreign_problem(ramp_problem, eckart_problem):
    state = initial_state(ramp_problem, build_grids(ramp_problem, 8))
    assert observables.probabilities(state, ramp_problem).P_trans[0] == pytest.approx(1.0)
    with pytest.raises(ConfigurationError):
        observables.probabilities(state, eckart_problem)


def test_component_labels(coupled_state):
    x_label, flux_label = observables.component_flux(coupled_state, "2-")
    x_tuple, flux_tuple = observables.component_flux(coupled_state, (1, -1))
    np.testing.assert_array_equal(x_label, x_tuple)
    np.testing.assert_array_equal(flux_label, flux_tuple)
    assert np.all(flux_label <= 0.0)
    for bad in ("3+", "1", "x+", (0, 0)):
        with pytest.raises((ConfigurationError, ValueError)):
            observables.component_flux(coupled_state, bad)


def test_coupling_rate_is_antisymmetric(coupled_state):
    x = np.linspace(-2.5, 2.5, 41)
    _, forward = observables.coupling_rate(coupled_state, "1+", "2+", positions=x)
    _, backward = observables.coupling_rate(coupled_state, "2+", "1+", positions=x)
    np.testing.assert_allclose(forward, -backward, atol=1e-15)
    assert np.any(forward != 0.0)

    positions, own = observables.coupling_rate(coupled_state, "1+", "1-")
    np.testing.assert_array_equal(positions, coupled_state.component(0, 1).positions)
    assert own.shape == positions.shape

    with pytest.raises(ConfigurationError):
        observables.coupling_rate(coupled_state, "1+", "1+")


def test_summed_density_profile(coupled_state):
    profile = observables.summed_density_profile(coupled_state)
    assert set(profile) == {"x", "rho_plus", "rho_minus", "difference"}
    np.testing.assert_allclose(profile["difference"], profile["rho_plus"] - profile["rho_minus"])
    assert np.all(profile["rho_plus"] >= 0.0)


def test_window_population_and_continuity(coupled_state):
    assert observables.window_population(coupled_state) > 0.0
    with pytest.raises(ConfigurationError):
        observables.continuity_residual(coupled_state, coupled_state)


def test_density_snapshot_rows(coupled_state):
    rows = observables.density_snapshot(coupled_state)
    assert len(rows) == sum(component.grid.count for component in coupled_state.components)
    assert set(rows[0]) == {"t", "component", "x", "rho", "S"}
    assert {row["component"] for row in rows} == {"1+", "1-", "2+", "2-"}


def test_stueckelberg_wavelength(tully2_problem):
    """Asymptotic momenta of Tully model 2 at E = exp(-2) give a 1.311 bohr beat."""
    phase = observables.stueckelberg(tully2_problem)
    assert phase.wavelength == pytest.approx(1.311, abs=0.005)
    assert phase.phase > 0.0

    local = observables.stueckelberg(tully2_problem, x=4.5)
    assert local.wavelength == pytest.approx(1.328, abs=0.005)


def test_stueckelberg_definite_form_starts_at_x0(tully2_problem):
    asymptotic = observables.stueckelberg(tully2_problem)
    explicit = observables.stueckelberg(tully2_problem, x=tully2_problem.x_right, x0=0.0)
    assert asymptotic.phase == pytest.approx(explicit.phase, rel=1e-10)

    # the model is symmetric about the crossing
    whole = observables.stueckelberg(tully2_problem, x=tully2_problem.x_right, x0=tully2_problem.x_left)
    assert whole.phase == pytest.approx(2.0 * asymptotic.phase, rel=1e-8)
    shifted = observables.stueckelberg(tully2_problem, x0=1.0)
    assert shifted.phase != pytest.approx(asymptotic.phase, rel=1e-3)


def test_stueckelberg_equal_surfaces(pure_coupling_problem):
    phase = observables.stueckelberg(pure_coupling_problem)
    assert phase.phase == 0.0
    assert math.isinf(phase.wavelength)


def test_stueckelberg_needs_two_surfaces(eckart_problem):
    with pytest.raises(ConfigurationError):
        observables.stueckelberg(eckart_problem)


def test_oscillation_wavelength():
    x = np.linspace(0.0, 10.0, 200)
    assert observables.oscillation_wavelength(x, 1.0 + 0.2 * np.cos(2 * np.pi * x / 1.3)) == pytest.approx(1.3, abs=2e-3)
    assert math.isnan(observables.oscillation_wavelength(x, 0.5 * x))
