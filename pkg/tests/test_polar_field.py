#!/usr/bin/env python3
"""
Tests for polar interpolation between incommensurate grids.
"""

import numpy as np
import pytest
from scipy.interpolate import CubicSpline

from cpwm_solver.components.core import InterpolationError
from cpwm_solver.components.polar_field import ComponentField, PolarInterpolant, interpolate_polar, unwrap_residual
from cpwm_solver.components.propagator import initial_state
from cpwm_solver.components.trajectory_grid import build_grids


def no_trend(x):
    return np.zeros_like(np.asarray(x, dtype=float))


def test_plane_wave_is_reproduced_exactly():
    """With the WKB trend removed, a plane wave has constant density and zero residual phase."""
    k = 3.0
    x = np.linspace(0.0, 5.0, 40)
    interpolant = PolarInterpolant(x, 2.0 * np.exp(1j * k * x), lambda s: k * np.asarray(s))

    targets = np.linspace(0.1, 4.9, 57)
    np.testing.assert_allclose(interpolant(targets), 2.0 * np.exp(1j * k * targets), atol=1e-12)


def test_smooth_wave_without_trend():
    x = np.linspace(0.0, 4.0, 201)
    values = (1.0 + 0.1 * x) * np.exp(0.5j * x * x)
    interpolant = PolarInterpolant(x, values, no_trend)

    targets = 0.5 * (x[50:150] + x[51:151])
    exact = (1.0 + 0.1 * targets) * np.exp(0.5j * targets * targets)
    np.testing.assert_allclose(interpolant(targets), exact, atol=1e-6)


def test_targets_outside_take_extremal_values():
    x = np.linspace(0.0, 1.0, 6)
    values = np.exp(1j * x) * (1.0 + x)
    interpolant = PolarInterpolant(x, values, no_trend)
    out = interpolant(np.array([-0.5, 1.5]))
    assert out[0] == values[0]
    assert out[1] == values[-1]


def test_negative_spline_density_is_clamped():
    x = np.arange(7.0)
    rho = np.array([0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0])
    fine = np.linspace(0.0, 6.0, 601)
    assert CubicSpline(x, rho, bc_type="natural")(fine).min() < 0.0

    density = PolarInterpolant(x, np.sqrt(rho).astype(complex), no_trend).density(fine)
    assert np.all(np.isfinite(density))
    assert density.min() == 0.0


def test_empty_component_interpolates_to_zero():
    x = np.linspace(0.0, 1.0, 5)
    interpolant = PolarInterpolant(x, np.zeros(5, dtype=complex), no_trend)
    assert not np.any(interpolant(np.linspace(-1.0, 2.0, 7)))


def test_interpolation_errors():
    with pytest.raises(InterpolationError):
        PolarInterpolant(np.arange(3.0), np.ones(3), no_trend)
    with pytest.raises(InterpolationError):
        PolarInterpolant(np.array([0.0, 2.0, 1.0, 3.0]), np.ones(4), no_trend)


def test_unwrap_residual_removes_trend():
    x = np.linspace(0.0, 10.0, 50)
    residual = unwrap_residual(np.exp(1j * (4.0 * x + 0.3)), 4.0 * x)
    np.testing.assert_allclose(residual, 0.3, atol=1e-12)


def test_component_field_on_trajectory_grid(ramp_problem):
    grids = build_grids(ramp_problem, 16)
    state = initial_state(ramp_problem, grids)
    incident = state.component(0, 1)

    assert incident.label == "1+"
    assert np.all(np.diff(incident.phase) > 0)
    np.testing.assert_allclose(interpolate_polar(incident, incident.positions), incident.values, atol=1e-12)

    density, phase = incident.polar()
    np.testing.assert_allclose(density, ramp_problem.velocity(0, -1.5) / incident.grid.velocities, rtol=1e-10)

    with pytest.raises(InterpolationError):
        ComponentField(grids[0], np.zeros(3))
