#!/usr/bin/env python
"""
Bipolar CPWM - Main Application

Command-line front end: output-tree initialization, single solves, energy
scans, convergence sweeps, problem validation and reference-oracle runs.

Exit codes: 0 success, 1 numerical failure or failed oracle comparison,
2 configuration error.
"""

import os
import sys
import json
import logging
import argparse
from pathlib import Path
from typing import Dict, List, Any, Optional

import yaml
from pydantic import ValidationError

from cpwm_solver.components.config import settings
from cpwm_solver.components.core import (
    ConfigurationError,
    InterpolationError,
    PropagationError,
    hartree_to_wavenumber,
)
from cpwm_solver.components.potential_models import (
    BENCHMARKS,
    eckart_exact,
    tanh_step_exact,
    validate_problem,
)
from cpwm_solver.components.reference_oracle import solve_reference
from cpwm_solver.components.run_config import PRESETS, RunConfig
from cpwm_solver.components.run_manager import RunManager
from cpwm_solver.components.scan_manager import SWEEP_PARAMETERS, ScanManager

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_CONFIG = 2


def _add_problem_arguments(parser: argparse.ArgumentParser) -> None:
    """Flags shared by every command that describes a scattering problem."""
    source = parser.add_argument_group("problem")
    source.add_argument("--config", help="Run description (YAML/JSON), or a result.json to replay")
    source.add_argument("--preset", choices=sorted(PRESETS), help="Published run parameters")
    source.add_argument("--benchmark", choices=sorted(BENCHMARKS), help="Built-in benchmark model")
    source.add_argument("--model", help="Model description file (YAML)")
    source.add_argument(
        "--param", action="append", default=[], metavar="KEY=VALUE",
        help="Benchmark shape parameter override, e.g. coupling='150 cm-1'",
    )
    source.add_argument("--E", dest="energy", help="Energy in hartree (or with a unit, e.g. '100 cm-1')")
    source.add_argument("--E-cm", dest="energy_cm", type=float, help="Energy in cm^-1")
    source.add_argument("--xl", dest="x_left", type=float, help="Left window edge (bohr)")
    source.add_argument("--xr", dest="x_right", type=float, help="Right window edge (bohr)")
    source.add_argument("--mass", type=float, help="Mass (a.u.)")

    numerics = parser.add_argument_group("numerics")
    numerics.add_argument("--N", dest="N", type=int, help="Grid points on surface 1")
    numerics.add_argument("--tmax", dest="t_max", type=float, help="Maximum relaxation time (a.u.)")
    numerics.add_argument("--integrator", choices=["rk4", "cash_karp", "phase_modified"])
    numerics.add_argument("--scheme", choices=["general", "phase_modified"])
    numerics.add_argument("--steps-per-shift", dest="steps_per_shift", type=int, help="RK4 steps per shift")
    numerics.add_argument("--delta", type=float, help="RK4 step (rounded to divide the shift time)")
    numerics.add_argument("--eps", dest="epsilon", type=float, help="Cash-Karp error tolerance")
    numerics.add_argument("--p-tol", dest="p_tol", type=float, help="Convergence tolerance on probabilities")
    numerics.add_argument("--snapshot-every", dest="snapshot_every", type=int, help="Density snapshot cadence (shifts)")
    numerics.add_argument("--output", help="Output directory")


def parse_arguments(argv: Optional[List[str]] = None) -> argparse.Namespace:
    """Parse command-line arguments."""
    parser = argparse.ArgumentParser(prog="bipolar-cpwm", description="Bipolar counter-propagating wave scattering solver")
    parser.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level")
    parser.add_argument("--settings", help="Solver settings file (YAML)")

    subparsers = parser.add_subparsers(dest="command", help="Command to execute")

    init_parser = subparsers.add_parser("init", help="Lay out the output tree and write benchmark model files")
    init_parser.add_argument("--output", help="Output directory")

    solve_parser = subparsers.add_parser("solve", help="Relax one problem to its stationary state")
    _add_problem_arguments(solve_parser)
    solve_parser.add_argument("--name", help="Run name")
    solve_parser.add_argument("--oracle", action="store_true", help="Compare with the reference oracle")

    scan_parser = subparsers.add_parser("scan", help="Solve over a grid of energies")
    _add_problem_arguments(scan_parser)
    scan_parser.add_argument("--energies", nargs="+", help="Explicit energies (hartree or with units)")
    scan_parser.add_argument("--E-range", dest="energy_range", nargs=3, metavar=("START", "STOP", "NUM"))
    scan_parser.add_argument("--E-cm-range", dest="energy_cm_range", nargs=3, metavar=("START", "STOP", "NUM"))
    scan_parser.add_argument("--log", action="store_true", help="Logarithmic energy spacing")
    scan_parser.add_argument("--workers", type=int, help="Concurrent solves")
    scan_parser.add_argument("--oracle", action="store_true", help="Compare every energy with the reference oracle")
    scan_parser.add_argument("--name", help="Scan name")

    converge_parser = subparsers.add_parser("converge", help="Sweep one convergence parameter")
    _add_problem_arguments(converge_parser)
    converge_parser.add_argument("--parameter", required=True, choices=SWEEP_PARAMETERS)
    converge_parser.add_argument("--values", required=True, nargs="+", help="Parameter values, cheapest first")
    converge_parser.add_argument("--target", type=float, help="Accuracy that flags the minimal value")
    converge_parser.add_argument("--reference", choices=["oracle", "last"], default="oracle")
    converge_parser.add_argument("--workers", type=int, help="Concurrent solves")
    converge_parser.add_argument("--name", help="Sweep name")

    validate_parser = subparsers.add_parser("validate", help="Check a problem without propagating")
    _add_problem_arguments(validate_parser)

    oracle_parser = subparsers.add_parser("oracle", help="Solve a problem with the reference oracle only")
    _add_problem_arguments(oracle_parser)
    oracle_parser.add_argument("--exact", action="store_true", help="Also print closed-form results where known")

    subparsers.add_parser("presets", help="List presets and benchmarks")

    return parser.parse_args(argv)


def _configure_logging(args: argparse.Namespace) -> None:
    """Level precedence: --log-level, then CPWM_LOG_LEVEL, then the settings file."""
    level = args.log_level or os.environ.get("CPWM_LOG_LEVEL") or settings.log_level
    logging.basicConfig(
        level=getattr(logging, str(level).upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr,
        force=True,
    )


def _parse_params(pairs: List[str]) -> Dict[str, Any]:
    params = {}
    for pair in pairs:
        if "=" not in pair:
            raise ConfigurationError(f"--param expects KEY=VALUE, got '{pair}'")
        key, value = pair.split("=", 1)
        params[key.strip()] = yaml.safe_load(value)
    return params


def build_run_config(args: argparse.Namespace) -> RunConfig:
    """
    Merge a run file (if any) with command-line flags; flags win.

    Args:
        args: Parsed arguments of a problem command

    Returns:
        Unresolved RunConfig
    """
    data: Dict[str, Any] = {}
    if args.config:
        data = RunConfig.load(args.config).model_dump(exclude_none=True)

    sources = {"preset": args.preset, "benchmark": args.benchmark, "model_file": args.model}
    if args.benchmark or args.model:
        for key in ("benchmark", "model", "model_file"):
            data.pop(key, None)
    for key, value in sources.items():
        if value is not None:
            data[key] = value

    if args.param:
        data["params"] = {**data.get("params", {}), **_parse_params(args.param)}

    if args.energy is not None:
        data["energy"] = args.energy
    if args.energy_cm is not None:
        data["energy"] = f"{args.energy_cm} cm-1"

    for key in (
        "x_left", "x_right", "mass", "N", "t_max", "integrator", "scheme",
        "steps_per_shift", "delta", "epsilon", "p_tol", "snapshot_every",
    ):
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    if getattr(args, "output", None):
        data["output_dir"] = args.output

    if getattr(args, "energies", None):
        data["energies"] = args.energies
    spacing = "log" if getattr(args, "log", False) else "linear"
    if getattr(args, "energy_range", None):
        start, stop, num = args.energy_range
        data["energy_grid"] = {"start": start, "stop": stop, "num": _count(num), "spacing": spacing}
    if getattr(args, "energy_cm_range", None):
        start, stop, num = args.energy_cm_range
        data["energy_grid"] = {"start": f"{start} cm-1", "stop": f"{stop} cm-1", "num": _count(num), "spacing": spacing}

    return RunConfig.model_validate(data)


def _count(value: str) -> int:
    try:
        return int(value)
    except ValueError as e:
        raise ConfigurationError(f"Energy grid size must be an integer, got '{value}'") from e


def _parse_sweep_values(parameter: str, values: List[str]) -> List[Any]:
    cast = int if parameter in ("N", "steps_per_shift") else float
    try:
        return [cast(value) for value in values]
    except ValueError as e:
        raise ConfigurationError(f"Bad value for {parameter}: {e}") from e


def _print(data: Dict[str, Any]) -> None:
    print(json.dumps(data, indent=2, default=str))


def cmd_init(args: argparse.Namespace) -> int:
    from cpwm_solver.initialize import initialize_all

    initialize_all(Path(args.output) if args.output else settings.output_dir)
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    config = build_run_config(args).resolved()
    manager = RunManager(config.output_dir)
    outcome = manager.solve(config, name=args.name, with_oracle=args.oracle)

    record = outcome["record"]
    summary = {"run_id": outcome["run_id"], "run_dir": outcome["run_dir"], **record["result"]}
    summary.pop("diagnostics", None)
    if "oracle" in record:
        summary["oracle"] = record["oracle"]["comparison"]
    _print(summary)
    return EXIT_OK if outcome["passed"] else EXIT_NUMERICAL


def cmd_scan(args: argparse.Namespace) -> int:
    config = build_run_config(args).resolved()
    manager = ScanManager(config.output_dir, max_workers=args.workers)
    outcome = manager.scan(config, name=args.name, with_oracle=args.oracle)
    _print({"scan_dir": outcome["scan_dir"], "energies": len(outcome["rows"]), "failures": outcome["failures"]})
    if args.oracle:
        tolerance = settings.get("oracle.compare_tol", 1e-4)
        worst = max((row.get("max_defect", 0.0) for row in outcome["rows"]), default=0.0)
        if worst > tolerance:
            logger.error(f"Largest oracle defect {worst:.3g} exceeds {tolerance:g}")
            return EXIT_NUMERICAL
    return EXIT_NUMERICAL if outcome["failures"] else EXIT_OK


def cmd_converge(args: argparse.Namespace) -> int:
    config = build_run_config(args).resolved()
    values = _parse_sweep_values(args.parameter, args.values)
    manager = ScanManager(config.output_dir, max_workers=args.workers)
    outcome = manager.converge(config, args.parameter, values, target=args.target, reference=args.reference, name=args.name)
    columns = [args.parameter, "max_delta", "order", "cpu_time", "error"]
    _print(
        {
            "scan_dir": outcome["scan_dir"],
            "minimal": outcome["minimal"],
            "rows": [{key: row[key] for key in columns if key in row} for row in outcome["rows"]],
        }
    )
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    config = build_run_config(args).resolved()
    report = validate_problem(config.problem())
    _print(report.to_dict())
    return EXIT_OK if report.passed else EXIT_CONFIG


def cmd_oracle(args: argparse.Namespace) -> int:
    config = build_run_config(args).resolved()
    problem = config.problem()
    solution = solve_reference(problem)
    output = solution.to_dict()

    if args.exact and config.benchmark in ("eckart_a", "eckart_b") and not config.params.get("center"):
        p = {**BENCHMARKS[config.benchmark].defaults, **config.params}
        refl, trans = eckart_exact(float(p["height"]), float(p["width"]), problem.mass, problem.energy, problem.hbar)
        output["exact"] = {"P_refl": [refl], "P_trans": [trans]}
    elif args.exact and config.benchmark == "uphill_ramp":
        p = {**BENCHMARKS["uphill_ramp"].defaults, **config.params}
        left = float(p["left"])
        refl, trans = tanh_step_exact(left, left + float(p["height"]), float(p["beta"]), problem.mass, problem.energy, problem.hbar)
        output["exact"] = {"P_refl": [refl], "P_trans": [trans]}

    output["energy_cm"] = hartree_to_wavenumber(problem.energy)
    _print(output)
    return EXIT_OK


def cmd_presets(_args: argparse.Namespace) -> int:
    _print(
        {
            "presets": {name: {k: v for k, v in preset.items()} for name, preset in PRESETS.items()},
            "benchmarks": {name: spec.defaults for name, spec in BENCHMARKS.items()},
        }
    )
    return EXIT_OK


COMMANDS = {
    "init": cmd_init,
    "solve": cmd_solve,
    "scan": cmd_scan,
    "converge": cmd_converge,
    "validate": cmd_validate,
    "oracle": cmd_oracle,
    "presets": cmd_presets,
}


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for Bipolar CPWM."""
    args = parse_arguments(argv)

    if args.settings:
        if not Path(args.settings).exists():
            print(f"Settings file not found: {args.settings}", file=sys.stderr)
            return EXIT_CONFIG
        settings.__init__(args.settings)
    _configure_logging(args)

    if not args.command:
        print("No command given; try 'bipolar-cpwm solve --preset eckart_a'", file=sys.stderr)
        return EXIT_CONFIG

    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, ValidationError) as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_CONFIG
    except (PropagationError, InterpolationError) as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
