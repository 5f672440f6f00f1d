#!/usr/bin/env python3
"""
Tests for energy scans and convergence sweeps.
"""

import json

import pytest

from cpwm_solver.components.core import ConfigurationError, wavenumber_to_hartree
from cpwm_solver.components.run_config import RunConfig
from cpwm_solver.components.scan_manager import ScanManager, _convergence_orders, solve_energy

ENERGIES = ["300 cm-1", "400 cm-1", "500 cm-1"]


def small_eckart(**overrides) -> RunConfig:
    options = {"N": 8, "t_max": 2000.0, **overrides}
    return RunConfig.from_preset("eckart_a", **options)


def probability_columns(rows):
    return [{key: value for key, value in row.items() if key.startswith("P")} for row in rows]


def test_solve_energy_row():
    config = small_eckart().resolved()
    row = solve_energy(config, config.energy)
    assert row["E_cm"] == pytest.approx(400.0)
    assert {"P1_refl", "P1_trans", "unitarity_defect", "converged", "cpu_time", "step"} <= set(row)
    assert "error" not in row


def test_scan_rows_follow_energy_grid(tmp_path):
    outcome = ScanManager(tmp_path, max_workers=2).scan(small_eckart(energies=ENERGIES))
    rows = outcome["rows"]
    assert [row["E_cm"] for row in rows] == pytest.approx([300.0, 400.0, 500.0])
    assert outcome["failures"] == 0

    with open(outcome["paths"]["record"]) as f:
        record = json.load(f)
    assert record["kind"] == "cpwm_scan"
    assert record["schema_version"] == 1
    assert len(record["rows"]) == 3
    with open(outcome["paths"]["table"]) as f:
        assert f.readline().strip().startswith("E,E_cm,P1_refl,P1_trans")


def test_results_do_not_depend_on_worker_count(tmp_path):
    config = small_eckart(energies=ENERGIES)
    serial = ScanManager(tmp_path / "serial", max_workers=1).scan(config)
    parallel = ScanManager(tmp_path / "parallel", max_workers=3).scan(config)
    assert probability_columns(serial["rows"]) == probability_columns(parallel["rows"])


def test_failed_energy_becomes_error_row(tmp_path):
    config = RunConfig.from_preset("uphill_ramp", N=8, t_max=1500.0, energies=[0.0015, 0.0023])
    outcome = ScanManager(tmp_path, max_workers=2).scan(config)
    assert outcome["failures"] == 1
    first, second = outcome["rows"]
    assert "error" in first
    assert "error" not in second
    assert "P1_trans" in second


@pytest.mark.anyio
async def test_scan_async(tmp_path):
    rows = await ScanManager(tmp_path, max_workers=2).scan_async(small_eckart(energies=ENERGIES[:2]))
    assert [row["E"] for row in rows] == pytest.approx([wavenumber_to_hartree(300.0), wavenumber_to_hartree(400.0)])


def test_converge_against_last_value(tmp_path):
    outcome = ScanManager(tmp_path, max_workers=2).converge(
        small_eckart(steps_per_shift=2), "N", [6, 8], target=10.0, reference="last"
    )
    rows = outcome["rows"]
    assert [row["N"] for row in rows] == [6, 8]
    assert rows[-1]["max_delta"] == 0.0
    assert outcome["minimal"] == 6

    with open(outcome["paths"]["record"]) as f:
        record = json.load(f)
    assert record["kind"] == "cpwm_converge"
    assert record["parameter"] == "N"


def test_converge_steps_reports_order(tmp_path):
    outcome = ScanManager(tmp_path).converge(small_eckart(), "steps_per_shift", [1, 2], reference="last")
    rows = outcome["rows"]
    assert all("order" in row and "step" in row for row in rows)
    assert rows[0]["step"] == pytest.approx(2.0 * rows[1]["step"])
    # the last row is its own reference, so no order can be measured against it
    assert rows[1]["max_delta"] == 0.0
    assert rows[1]["order"] is None
    assert outcome["minimal"] is None


def test_converge_rejects_bad_arguments(tmp_path):
    manager = ScanManager(tmp_path)
    with pytest.raises(ConfigurationError):
        manager.converge(small_eckart(), "mass", [1.0, 2.0], reference="last")
    with pytest.raises(ConfigurationError):
        manager.converge(small_eckart(), "N", [6, 8], reference="median")


def test_convergence_orders():
    rows = [
        {"step": 0.1, "max_delta": 1.0e-4},
        {"step": 0.05, "max_delta": 6.25e-6},
        {"step": 0.025},
    ]
    orders = _convergence_orders(rows)
    assert orders[0] is None
    assert orders[1] == pytest.approx(4.0)
    assert orders[2] is None
