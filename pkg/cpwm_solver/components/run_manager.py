"""
Run Manager Component for Bipolar CPWM

Runs single solves and organizes their artifacts: one directory per run under
the output tree holding the result record, the convergence history, density
snapshots and the grid layout.
"""

import csv
import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Any, Union

import numpy as np

from . import observables
from .core import TurningPointError
from .potential_models import validate_problem
from .propagator import PropagationState, relax_to_stationary
from .reference_oracle import compare, solve_reference
from .run_config import SCHEMA_VERSION, RunConfig
from .trajectory_grid import write_grid_csv

logger = logging.getLogger(__name__)

SNAPSHOT_FIELDS = ["t", "component", "x", "rho", "S"]


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def write_json(data: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(data, f, indent=2, default=_json_default)
    return path


def write_rows_csv(rows: List[Dict[str, Any]], path: Union[str, Path], fieldnames: Optional[List[str]] = None) -> Path:
    """Write dict rows as CSV; the header comes from the first row unless given."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fieldnames is None:
        fieldnames = list(rows[0].keys()) if rows else []
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, extrasaction="ignore")
        writer.writeheader()
        writer.writerows(rows)
    return path


class RunManager:
    """Manages solver runs and their artifacts."""

    def __init__(self, base_dir: Union[str, Path] = "output"):
        """
        Initialize the run manager.

        Args:
            base_dir: Base directory for all outputs
        """
        self.base_dir = Path(base_dir)

        self.runs_dir = self.base_dir / "runs"
        self.scans_dir = self.base_dir / "scans"
        self.models_dir = self.base_dir / "models"

        for directory in (self.runs_dir, self.scans_dir, self.models_dir):
            directory.mkdir(exist_ok=True, parents=True)

    def create_run_dir(self, name: str) -> Path:
        """Fresh run directory named after the run and its start time."""
        stamp = datetime.now().strftime("%Y%m%d_%H%M%S_%f")
        run_dir = self.runs_dir / f"{self._sanitize_name(name)}_{stamp}"
        run_dir.mkdir(parents=True, exist_ok=False)
        return run_dir

    def solve(self, config: RunConfig, name: Optional[str] = None, with_oracle: bool = False) -> Dict[str, Any]:
        """
        Relax one problem to its stationary state and write the run artifacts.

        Args:
            config: Run description (unset fields are resolved here)
            name: Run name (defaults to the preset or model name)
            with_oracle: Also solve the reference oracle and record the comparison

        Returns:
            Dictionary with the run id, artifact paths and the result record
        """
        config = config.resolved()
        problem = config.problem()
        report = validate_problem(problem)
        if not report.passed:
            raise TurningPointError("; ".join(report.failures))

        snapshots: List[Dict[str, Any]] = []

        def on_snapshot(state: PropagationState) -> None:
            snapshots.extend(observables.density_snapshot(state))

        result, state = relax_to_stationary(problem, config.relaxation(), on_snapshot=on_snapshot)
        snapshots.extend(observables.density_snapshot(state))

        record: Dict[str, Any] = {
            "schema_version": SCHEMA_VERSION,
            "kind": "cpwm_result",
            "created_at": datetime.now().isoformat(),
            "config": config.model_dump(mode="json"),
            "problem": problem.describe(),
            "validation": report.to_dict(),
            "result": result.to_dict(),
        }

        passed = True
        if with_oracle:
            oracle = solve_reference(problem)
            comparison = compare(result, oracle)
            passed = comparison["passed"]
            record["oracle"] = {**oracle.to_dict(), "comparison": comparison}

        run_dir = self.create_run_dir(name or config.preset or problem.model.name)
        paths = {
            "result": write_json(record, run_dir / "result.json"),
            "history": write_rows_csv(result.history, run_dir / "history.csv"),
            "snapshots": write_rows_csv(snapshots, run_dir / "snapshots.csv", SNAPSHOT_FIELDS),
            "grid": write_grid_csv(state.grids, run_dir / "grid.csv"),
        }
        logger.info(f"Run artifacts written to {run_dir}")

        return {
            "run_id": run_dir.name,
            "run_dir": str(run_dir),
            "paths": {key: str(path) for key, path in paths.items()},
            "record": record,
            "passed": passed,
        }

    def get_run(self, run_id: str) -> Dict[str, Any]:
        """
        Load the result record of a run.

        Args:
            run_id: Run ID (directory name)

        Returns:
            Result record, or a dictionary with an "error" key
        """
        result_path = self.runs_dir / run_id / "result.json"
        if not result_path.exists():
            return {
                "error": f"Run {run_id} not found",
                "available_runs": [run["id"] for run in self.list_runs()["runs"]],
            }
        with open(result_path, "r") as f:
            return json.load(f)

    def list_runs(self) -> Dict[str, List[Dict[str, Any]]]:
        """
        List all runs with their headline numbers.

        Returns:
            Dictionary with list of runs
        """
        runs = []
        for run_dir in sorted(d for d in self.runs_dir.glob("*") if d.is_dir()):
            result_path = run_dir / "result.json"
            if not result_path.exists():
                continue
            with open(result_path, "r") as f:
                record = json.load(f)
            result = record.get("result", {})
            runs.append(
                {
                    "id": run_dir.name,
                    "model": record.get("problem", {}).get("model", {}).get("name", "unknown"),
                    "energy": record.get("problem", {}).get("energy"),
                    "converged": result.get("converged"),
                    "created_at": record.get("created_at", ""),
                }
            )
        return {"runs": runs}

    def _sanitize_name(self, name: str) -> str:
        """Convert a name to a safe directory/file name."""
        return name.lower().replace(" ", "_").replace("-", "_").replace(".", "p").replace("/", "_")
