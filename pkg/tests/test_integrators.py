#!/usr/bin/env python3
"""
Tests for the fixed-step RK4 and adaptive Cash-Karp integrators.
"""

import math

import numpy as np
import pytest

from cpwm_solver.components.core import PropagationError
from cpwm_solver.components.integrators import CashKarpStepper, cash_karp_attempt, rk4_step


def decay(_tau, y):
    return -y


def rk4_solve(steps: int) -> complex:
    y = np.array([1.0 + 0.0j])
    h = 1.0 / steps
    for n in range(steps):
        y = rk4_step(decay, n * h, y, h)
    return complex(y[0])


def test_rk4_single_step_accuracy():
    y = rk4_step(decay, 0.0, np.array([1.0 + 0.0j]), 0.1)
    assert abs(y[0] - math.exp(-0.1)) < 1e-6


def test_rk4_is_fourth_order():
    coarse = abs(rk4_solve(10) - math.exp(-1.0))
    fine = abs(rk4_solve(20) - math.exp(-1.0))
    assert 12.0 < coarse / fine < 20.0


def test_rk4_rotates_complex_phase():
    """y' = iEy keeps |y| to O(h^6) per step."""
    energy = 0.5
    y = np.array([1.0 + 0.0j])
    for n in range(100):
        y = rk4_step(lambda _t, v: 1j * energy * v, n * 0.05, y, 0.05)
    assert abs(y[0] - np.exp(1j * energy * 5.0)) < 1e-7


def test_cash_karp_attempt_error_estimate():
    y, err = cash_karp_attempt(lambda _t, v: v, 0.0, np.array([1.0]), 0.1)
    assert abs(y[0] - math.exp(0.1)) < 1e-9
    assert 0.0 < err < 1e-6


def test_cash_karp_stepper_integrates_gaussian():
    stepper = CashKarpStepper(tolerance=1e-10, min_step=1e-12, max_step=0.5)
    rhs = lambda tau, y: -2.0 * tau * y
    tau, y, h = 0.0, np.array([1.0 + 0.0j]), 0.01
    while tau < 2.0 - 1e-14:
        y, used, h = stepper.step(rhs, tau, y, h, limit=2.0 - tau)
        tau += used

    assert tau == pytest.approx(2.0, abs=1e-12)
    assert abs(y[0] - math.exp(-4.0)) < 1e-7
    assert sum(stepper.accepted) == pytest.approx(2.0, abs=1e-12)
    assert max(stepper.accepted) <= 0.5


def test_cash_karp_honours_step_limit():
    stepper = CashKarpStepper(tolerance=1e-6, min_step=1e-12, max_step=1.0)
    _, used, proposal = stepper.step(decay, 0.0, np.array([1.0]), 0.5, limit=0.01)
    assert used == pytest.approx(0.01)
    assert proposal >= 0.5


def test_cash_karp_finishes_interval_within_reach():
    stepper = CashKarpStepper(tolerance=1e-6, min_step=1e-12, max_step=1.0)
    y, used, proposal = stepper.step(decay, 0.0, np.array([1.0]), 0.01)
    assert proposal == pytest.approx(0.05)
    assert stepper.reach > 0.06

    # the safety factor alone would leave a 0.01 sliver
    _, stretched, _ = stepper.step(decay, used, y, proposal, limit=0.06)
    assert stretched == pytest.approx(0.06)

    _, unstretched, _ = stepper.step(decay, used, y, 0.05, limit=10.0)
    assert unstretched == pytest.approx(0.05)


def test_cash_karp_rejects_and_shrinks():
    stepper = CashKarpStepper(tolerance=1e-12, min_step=1e-12, max_step=10.0)
    _, used, _ = stepper.step(lambda _t, v: 5.0 * v, 0.0, np.array([1.0]), 1.0)
    assert used < 1.0
    assert stepper.rejected > 0


def test_cash_karp_gives_up_on_non_finite_rates():
    stepper = CashKarpStepper(tolerance=1e-6, min_step=1e-6, max_step=1.0)
    with pytest.raises(PropagationError):
        stepper.step(lambda _t, v: np.full_like(v, np.nan), 0.0, np.array([1.0]), 1.0)


def test_cash_karp_needs_positive_tolerance():
    with pytest.raises(PropagationError):
        CashKarpStepper(tolerance=0.0, min_step=1e-12, max_step=1.0)
