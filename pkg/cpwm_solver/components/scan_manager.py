"""
Scan Manager Component for Bipolar CPWM

Energy scans and convergence-parameter sweeps. Independent solves run
concurrently in worker threads; rows come back in input order, so results do
not depend on the number of workers.
"""

import math
import logging
from datetime import datetime
from functools import partial
from pathlib import Path
from typing import Dict, List, Optional, Any, Sequence, Union

import anyio

from .config import settings
from .core import ConfigurationError, CPWMError, hartree_to_wavenumber
from .propagator import relax_to_stationary
from .reference_oracle import OracleSolution, solve_reference
from .run_config import SCHEMA_VERSION, RunConfig
from .run_manager import write_json, write_rows_csv

logger = logging.getLogger(__name__)

SWEEP_PARAMETERS = ("N", "steps_per_shift", "delta", "epsilon", "t_max", "p_tol")


def _probability_columns(prefix: str, refl: Sequence[float], trans: Sequence[float]) -> Dict[str, float]:
    row = {}
    for i, value in enumerate(refl):
        row[f"{prefix}P{i + 1}_refl"] = value
    for i, value in enumerate(trans):
        row[f"{prefix}P{i + 1}_trans"] = value
    return row


def solve_energy(config: RunConfig, energy: float, with_oracle: bool = False) -> Dict[str, Any]:
    """
    Solve one energy of a scan. Failures come back as a row with an "error" key.

    Args:
        config: Resolved run description
        energy: Total energy (hartree)
        with_oracle: Add oracle probabilities and the largest defect

    Returns:
        Scan row
    """
    row: Dict[str, Any] = {"E": energy, "E_cm": hartree_to_wavenumber(energy)}
    try:
        single = config.model_copy(update={"energy": energy, "energies": None, "energy_grid": None})
        problem = single.problem()
        result, _ = relax_to_stationary(problem, single.relaxation())
        row.update(_probability_columns("", result.P_refl, result.P_trans))
        row["unitarity_defect"] = result.unitarity_defect
        row["converged"] = result.converged
        row["cpu_time"] = result.diagnostics["cpu_time"]
        if "delta" in result.diagnostics:
            row["step"] = result.diagnostics["delta"]
        if with_oracle:
            oracle = solve_reference(problem)
            row.update(_probability_columns("oracle_", oracle.P_refl, oracle.P_trans))
            row["max_defect"] = max(
                abs(a - b)
                for a, b in zip(result.P_refl + result.P_trans, oracle.P_refl + oracle.P_trans)
            )
    except CPWMError as e:
        logger.error(f"Scan energy {energy:.6g} failed: {e}")
        row["error"] = str(e)
    return row


def _fieldnames(rows: List[Dict[str, Any]]) -> List[str]:
    names: List[str] = []
    for row in rows:
        for key in row:
            if key not in names:
                names.append(key)
    return names


def _convergence_orders(rows: List[Dict[str, Any]]) -> List[Optional[float]]:
    """Observed order p of error ~ delta^p between consecutive fixed-step rows."""
    orders: List[Optional[float]] = [None]
    for before, after in zip(rows, rows[1:]):
        try:
            ratio = math.log(before["max_delta"] / after["max_delta"]) / math.log(before["step"] / after["step"])
            orders.append(ratio)
        except (KeyError, TypeError, ValueError, ZeroDivisionError):
            orders.append(None)
    return orders


class ScanManager:
    """Runs energy scans and convergence sweeps and writes their tables."""

    def __init__(self, base_dir: Union[str, Path] = "output", max_workers: Optional[int] = None):
        """
        Initialize the scan manager.

        Args:
            base_dir: Base directory for all outputs
            max_workers: Concurrent solves (defaults to scan.max_workers)
        """
        self.base_dir = Path(base_dir)
        self.scans_dir = self.base_dir / "scans"
        self.scans_dir.mkdir(exist_ok=True, parents=True)
        self.max_workers = max_workers or settings.get("scan.max_workers", 4)

    async def _map(self, jobs: List[Any]) -> List[Dict[str, Any]]:
        """Run blocking jobs in worker threads, keeping input order."""
        limiter = anyio.CapacityLimiter(self.max_workers)
        results: List[Optional[Dict[str, Any]]] = [None] * len(jobs)

        async def run(index: int, job: Any) -> None:
            results[index] = await anyio.to_thread.run_sync(job, limiter=limiter)

        async with anyio.create_task_group() as tg:
            for index, job in enumerate(jobs):
                tg.start_soon(run, index, job)
        return results

    async def scan_async(self, config: RunConfig, with_oracle: bool = False) -> List[Dict[str, Any]]:
        """
        Solve every energy of the configured grid concurrently.

        Returns:
            One row per energy, in grid order
        """
        config = config.resolved()
        energies = config.energy_values()
        logger.info(f"Scanning {len(energies)} energies with up to {self.max_workers} workers")
        return await self._map([partial(solve_energy, config, energy, with_oracle) for energy in energies])

    def scan(self, config: RunConfig, name: Optional[str] = None, with_oracle: bool = False) -> Dict[str, Any]:
        """
        Energy scan with artifacts.

        Args:
            config: Run description with an energy grid
            name: Scan name (defaults to the preset or benchmark name)
            with_oracle: Compare every energy with the reference oracle

        Returns:
            Dictionary with the rows, the failure count and artifact paths
        """
        resolved = config.resolved()
        rows = anyio.run(self.scan_async, resolved, with_oracle)
        failures = sum(1 for row in rows if "error" in row)

        scan_dir = self._create_scan_dir(name or resolved.preset or resolved.benchmark or "scan")
        table = write_rows_csv(rows, scan_dir / "scan.csv", _fieldnames(rows))
        record = write_json(
            {
                "schema_version": SCHEMA_VERSION,
                "kind": "cpwm_scan",
                "created_at": datetime.now().isoformat(),
                "config": resolved.model_dump(mode="json"),
                "rows": rows,
                "failures": failures,
            },
            scan_dir / "scan.json",
        )
        if failures:
            logger.warning(f"{failures} of {len(rows)} scan energies failed")
        return {"rows": rows, "failures": failures, "scan_dir": str(scan_dir), "paths": {"table": str(table), "record": str(record)}}

    async def converge_async(
        self,
        config: RunConfig,
        parameter: str,
        values: Sequence[Any],
        reference: Optional[OracleSolution] = None,
    ) -> List[Dict[str, Any]]:
        """Solve the first configured energy once per parameter value."""
        if parameter not in SWEEP_PARAMETERS:
            raise ConfigurationError(f"Cannot sweep '{parameter}'; choose from {', '.join(SWEEP_PARAMETERS)}")
        config = config.resolved()
        energy = config.energy_values()[0]

        def job(value: Any) -> Dict[str, Any]:
            update = {parameter: value}
            if parameter == "steps_per_shift":
                update["delta"] = None
            row = solve_energy(config.model_copy(update=update), energy)
            return {parameter: value, **row}

        rows = await self._map([partial(job, value) for value in values])

        for row in rows:
            if reference is not None and "error" not in row:
                current = [row[f"P{i + 1}_refl"] for i in range(reference.nsurf)]
                current += [row[f"P{i + 1}_trans"] for i in range(reference.nsurf)]
                row["max_delta"] = max(abs(a - b) for a, b in zip(current, reference.P_refl + reference.P_trans))
        return rows

    def converge(
        self,
        config: RunConfig,
        parameter: str,
        values: Sequence[Any],
        target: Optional[float] = None,
        reference: str = "oracle",
        name: Optional[str] = None,
    ) -> Dict[str, Any]:
        """
        Sweep one convergence parameter and report probability deltas.

        Args:
            config: Run description at a single energy
            parameter: One of SWEEP_PARAMETERS
            values: Parameter values, ordered from cheapest to most expensive
            target: Accuracy used to flag the cheapest sufficient value
            reference: "oracle" (reference solver) or "last" (final sweep value)
            name: Sweep name

        Returns:
            Dictionary with rows, the minimal sufficient value and artifact paths
        """
        if reference not in ("oracle", "last"):
            raise ConfigurationError(f"Sweep reference must be 'oracle' or 'last', got '{reference}'")
        resolved = config.resolved()
        oracle = solve_reference(resolved.problem()) if reference == "oracle" else None
        rows = anyio.run(self.converge_async, resolved, parameter, list(values), oracle)

        if oracle is None and rows and "error" not in rows[-1]:
            last = rows[-1]
            keys = [key for key in last if key.startswith("P") and key[1:2].isdigit()]
            for row in rows:
                if "error" not in row:
                    row["max_delta"] = max(abs(row[key] - last[key]) for key in keys)

        if parameter in ("delta", "steps_per_shift"):
            for row, order in zip(rows, _convergence_orders(rows)):
                row["order"] = order

        minimal = None
        if target is not None:
            for row in rows:
                if row.get("max_delta") is not None and row["max_delta"] <= target:
                    minimal = row[parameter]
                    break

        sweep_dir = self._create_scan_dir(name or f"converge_{parameter}")
        table = write_rows_csv(rows, sweep_dir / "converge.csv", _fieldnames(rows))
        record = write_json(
            {
                "schema_version": SCHEMA_VERSION,
                "kind": "cpwm_converge",
                "created_at": datetime.now().isoformat(),
                "config": resolved.model_dump(mode="json"),
                "parameter": parameter,
                "reference": reference,
                "target": target,
                "minimal": minimal,
                "rows": rows,
            },
            sweep_dir / "converge.json",
        )
        logger.info(f"Sweep of {parameter}: minimal value for target {target} is {minimal}")
        return {"rows": rows, "minimal": minimal, "scan_dir": str(sweep_dir), "paths": {"table": str(table), "record": str(record)}}

    def _create_scan_dir(self, name: str) -> Path:
        stamp = datetime.now().strftime("%Y%m%d_%H%M%S_%f")
        safe = name.lower().replace(" ", "_").replace("-", "_").replace(".", "p").replace("/", "_")
        scan_dir = self.scans_dir / f"{safe}_{stamp}"
        scan_dir.mkdir(parents=True, exist_ok=False)
        return scan_dir
