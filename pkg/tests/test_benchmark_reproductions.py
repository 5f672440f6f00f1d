#!/usr/bin/env python3
"""
Long relaxations of the shipped presets against the published benchmark digits,
plus the conservation and convergence-order properties of full runs.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from cpwm_solver.components import observables
from cpwm_solver.components.propagator import relax_to_stationary
from cpwm_solver.components.run_config import RunConfig
from cpwm_solver.components.scan_manager import ScanManager

pytestmark = pytest.mark.slow

ECKART_A_REFL = 0.283358063869
ECKART_A_TRANS = 0.716641936131


def run_preset(name, on_snapshot=None, **overrides):
    config = RunConfig.from_preset(name, **overrides).resolved()
    return relax_to_stationary(config.problem(), config.relaxation(), on_snapshot=on_snapshot)


def test_eckart_a_adaptive_preset_matches_exact_probabilities():
    result, _ = run_preset("eckart_a_adaptive")
    assert result.converged
    assert result.P_refl[0] == pytest.approx(ECKART_A_REFL, abs=2e-4)
    assert result.P_trans[0] == pytest.approx(ECKART_A_TRANS, abs=2e-4)
    assert abs(result.unitarity_defect) <= 1e-4


def test_eckart_a_fixed_step_preset_stays_near_exact_probabilities():
    """One RK4 step per shift leaves an error of order 1e-3 in the reflection."""
    result, _ = run_preset("eckart_a")
    assert result.P_refl[0] == pytest.approx(ECKART_A_REFL, abs=1e-3)
    assert result.P_trans[0] == pytest.approx(ECKART_A_TRANS, abs=1e-3)
    assert abs(result.unitarity_defect) <= 1e-3


def test_eckart_a_high_precision_preset():
    result, _ = run_preset("eckart_a_high")
    assert result.P_trans[0] == pytest.approx(ECKART_A_TRANS, abs=1e-7)
    assert result.P_refl[0] == pytest.approx(ECKART_A_REFL, abs=1e-7)
    assert abs(result.unitarity_defect) <= 1e-7


@pytest.mark.parametrize(
    "preset, transmission",
    [("eckart_b_0.4", 1.559e-5), ("eckart_b_0.1", 9.920e-10)],
)
def test_eckart_b_deep_tunneling_presets(preset, transmission):
    result, _ = run_preset(preset)
    assert result.P_trans[0] == pytest.approx(transmission, rel=5e-3)
    assert result.P_refl[0] <= 1.0 + 1e-6


def test_uphill_ramp_preset_reflection():
    result, _ = run_preset("uphill_ramp")
    assert result.converged
    assert result.P_refl[0] == pytest.approx(0.023901, abs=2e-4)
    assert abs(result.unitarity_defect) <= 1e-4


def test_pure_coupling_preset_reproduces_published_probabilities():
    result, state = run_preset("pure_coupling")
    assert result.converged
    assert result.P_refl == pytest.approx([0.17886, 0.22382], abs=2e-5)
    assert result.P_trans == pytest.approx([0.12194, 0.47537], abs=2e-5)
    assert abs(result.unitarity_defect) <= 1e-4

    problem = state.problem
    profile = observables.summed_density_profile(state, np.linspace(problem.x_left, problem.x_right, 121))
    assert np.std(profile["difference"]) <= 1e-4
    assert np.mean(profile["difference"]) == pytest.approx(sum(result.P_trans), abs=1e-4)


def test_tully1_preset_transmission():
    result, _ = run_preset("tully1")
    assert result.converged
    assert result.P_trans == pytest.approx([0.55016, 0.44983], abs=2e-4)
    assert sum(result.P_refl) < 1e-4
    assert abs(result.unitarity_defect) <= 1e-4


def test_tully2_transmitted_density_oscillation_wavelength():
    result, state = run_preset("tully2")
    assert result.converged
    assert abs(result.unitarity_defect) <= 1e-4

    x = np.linspace(4.5, 8.0, 1401)
    density = state.component(0, 1).interpolant().density(x)
    assert observables.oscillation_wavelength(x, density) == pytest.approx(1.31, abs=0.05)
    assert observables.stueckelberg(state.problem).wavelength == pytest.approx(1.31, abs=0.01)


def test_tully2_scan_agrees_with_reference_solver(tmp_path):
    config = RunConfig.from_preset("tully2", energies=[math.exp(-2.0), math.exp(-1.0)])
    outcome = ScanManager(tmp_path, max_workers=2).scan(config, "tully2_check", with_oracle=True)
    assert outcome["failures"] == 0
    for row in outcome["rows"]:
        assert row["max_defect"] <= 1e-2


def test_rk4_error_shrinks_with_fourth_order():
    config = RunConfig.from_preset("eckart_a").resolved()
    problem = config.problem()
    reflections = []
    for steps in (1, 2, 4, 8):
        relaxation = replace(config.relaxation(), steps_per_shift=steps, stop_on_convergence=False)
        result, _ = relax_to_stationary(problem, relaxation)
        reflections.append(result.P_refl[0])

    differences = np.abs(np.diff(reflections))
    # a fourth-order method shrinks each difference sixteenfold
    assert np.all(differences[1:] * 8.0 < differences[:-1])


def test_continuity_holds_throughout_coupled_relaxation():
    epsilon = 1e-5
    snapshots = []
    result, _ = run_preset("pure_coupling", on_snapshot=snapshots.append, epsilon=epsilon, snapshot_every=1)
    assert len(snapshots) > 20

    residuals = [
        observables.continuity_residual(before, after, middle=middle)
        for before, middle, after in zip(snapshots[:-2:2], snapshots[1:-1:2], snapshots[2::2])
    ]
    assert max(residuals) <= 10 * epsilon
    assert abs(result.unitarity_defect) <= 1e-4


def test_adaptive_steps_settle_at_shift_time():
    result, _ = run_preset("eckart_a_adaptive", epsilon=5e-5)
    steps = np.array(result.diagnostics["accepted_steps"]) / result.diagnostics["t_shift"]

    assert steps[0] < 0.1
    assert np.all(steps <= 1.0 + 1e-12)
    full = np.isclose(steps, 1.0, rtol=1e-9)
    assert full[-6:].all()
    assert result.P_trans[0] == pytest.approx(ECKART_A_TRANS, abs=1e-3)
