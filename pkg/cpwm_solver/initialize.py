"""
Initialization script for Bipolar CPWM

Lays out the output tree and seeds it with one model file per built-in
benchmark and one run file per published preset, so runs can be edited and
replayed from files.
"""

import logging
import sys
from pathlib import Path
from typing import List

from cpwm_solver.components.potential_models import BENCHMARKS, make_benchmark, save_model
from cpwm_solver.components.run_config import PRESETS, RunConfig

logger = logging.getLogger("bipolar_cpwm.init")


def initialize_directory_structure(base_dir: Path) -> None:
    """
    Create the run, scan, model and preset directories.

    Args:
        base_dir: Base directory for all outputs
    """
    logger.info(f"Initializing directory structure in {base_dir}")
    for sub in ("runs", "scans", "models", "presets"):
        (base_dir / sub).mkdir(parents=True, exist_ok=True)


def initialize_benchmark_models(models_dir: Path) -> List[Path]:
    """
    Write every built-in benchmark as a YAML model file; existing files are kept.

    Args:
        models_dir: Directory for model descriptions
    """
    logger.info(f"Writing benchmark models to {models_dir}")
    written = []
    for name in BENCHMARKS:
        path = models_dir / f"{name}.yaml"
        if path.exists():
            continue
        written.append(save_model(make_benchmark(name), path))
    return written


def initialize_presets(presets_dir: Path) -> List[Path]:
    """Write every preset as a YAML run file; existing files are kept."""
    logger.info(f"Writing run presets to {presets_dir}")
    written = []
    for name in PRESETS:
        path = presets_dir / f"{name}.yaml"
        if path.exists():
            continue
        written.append(RunConfig.from_preset(name).save(path))
    return written


def initialize_all(base_dir: Path) -> None:
    """
    Initialize the output tree.

    Args:
        base_dir: Base directory for all outputs
    """
    logger.info(f"Starting initialization of Bipolar CPWM in {base_dir}")

    initialize_directory_structure(base_dir)
    models = initialize_benchmark_models(base_dir / "models")
    presets = initialize_presets(base_dir / "presets")

    logger.info(f"Initialization completed: {len(models)} model file(s), {len(presets)} preset file(s) written")


if __name__ == "__main__":
    import argparse

    logging.basicConfig(
        level=logging.INFO,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        stream=sys.stderr
    )

    parser = argparse.ArgumentParser(description="Initialize Bipolar CPWM output tree")
    parser.add_argument("--dir", type=str, default="output",
                        help="Base directory for all outputs")

    args = parser.parse_args()
    initialize_all(Path(args.dir))
