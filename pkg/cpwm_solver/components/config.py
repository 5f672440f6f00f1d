"""
Bipolar CPWM - Configuration Module

Layered solver settings: built-in defaults, an optional YAML file, then
environment overrides. Per-run parameters live in run_config.RunConfig; this
module only supplies the defaults those runs fall back on.
"""

import copy
import os
import logging
from pathlib import Path
from typing import Dict, Any, Optional

import yaml

logger = logging.getLogger(__name__)


class SolverSettings:
    """
    Central settings manager for the solver.

    Handles loading settings from files and environment variables with the
    precedence defaults < file < environment.
    """

    DEFAULT_CONFIG = {
        "framework": {
            "version": "0.1.0",
            "log_level": "INFO",
            "output_dir": "./output",
        },
        "physics": {
            "mass": 2000.0,
            "hbar": 1.0,
        },
        "propagation": {
            "integrator": "cash_karp",
            "steps_per_shift": 1,
            "epsilon": 1.0e-6,
            "first_step_fraction": 0.01,
            "min_step_fraction": 1.0e-12,
            "max_rejections": 50,
            "p_tol": 1.0e-6,
            "convergence_window": 10,
            "min_time_factor": 1.0,
            "snapshot_every": 0,
        },
        "trajectory": {
            "rtol": 1.0e-12,
            "atol": 1.0e-14,
            "phase_samples": 2000,
        },
        "validation": {
            "coupling_edge_tol": 1.0e-3,
            "policy_window": [-10.0, 10.0],
        },
        "oracle": {
            "kh_max": 0.02,
            "tail_tol": 1.0e-12,
            "max_half_width": 200.0,
            "compare_tol": 1.0e-4,
        },
        "scan": {
            "max_workers": 4,
        },
    }

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize the settings manager.

        Args:
            config_path: Path to a YAML settings file (optional)
        """
        self.config = copy.deepcopy(self.DEFAULT_CONFIG)
        self.config_path = config_path

        self._load_config_from_file()
        self._load_config_from_env()

        logger.debug(f"Settings initialized with {len(self.config)} top-level sections")

    def _load_config_from_file(self) -> None:
        """Load settings from the specified YAML file if it exists."""
        if not self.config_path:
            config_paths = [
                Path("./cpwm_config.yaml"),
                Path("./config/cpwm_config.yaml"),
                Path(os.path.expanduser("~/.bipolar_cpwm/config.yaml")),
            ]

            for path in config_paths:
                if path.exists():
                    self.config_path = str(path)
                    break

        if self.config_path and os.path.exists(self.config_path):
            try:
                with open(self.config_path, "r") as file:
                    file_config = yaml.safe_load(file)
                    if file_config:
                        self._deep_merge(self.config, file_config)
                logger.info(f"Loaded settings from {self.config_path}")
            except (OSError, yaml.YAMLError) as e:
                logger.error(f"Error loading settings from {self.config_path}: {e}")

    def _load_config_from_env(self) -> None:
        """Load overrides from environment variables."""
        if "CPWM_LOG_LEVEL" in os.environ:
            self.config["framework"]["log_level"] = os.environ["CPWM_LOG_LEVEL"]

        if "CPWM_OUTPUT_DIR" in os.environ:
            self.config["framework"]["output_dir"] = os.environ["CPWM_OUTPUT_DIR"]

    def _deep_merge(self, target: Dict, source: Dict) -> None:
        """
        Recursively merge source dictionary into target dictionary.

        Args:
            target: Target dictionary to merge into
            source: Source dictionary to merge from
        """
        for key, value in source.items():
            if key in target and isinstance(target[key], dict) and isinstance(value, dict):
                self._deep_merge(target[key], value)
            else:
                target[key] = value

    def get(self, key_path: str, default: Any = None) -> Any:
        """
        Get a setting using a dot-notation path.

        Args:
            key_path: Dot-notation path, e.g. "propagation.p_tol"
            default: Value returned if the path doesn't exist

        Returns:
            The setting or the default value
        """
        current = self.config

        for part in key_path.split("."):
            if isinstance(current, dict) and part in current:
                current = current[part]
            else:
                return default

        return current

    def set(self, key_path: str, value: Any) -> None:
        """
        Set a setting using a dot-notation path.

        Args:
            key_path: Dot-notation path to the setting
            value: Value to set
        """
        parts = key_path.split(".")
        current = self.config

        for part in parts[:-1]:
            if part not in current:
                current[part] = {}
            current = current[part]

        current[parts[-1]] = value

    def save(self, config_path: Optional[str] = None) -> None:
        """
        Save the current settings to a YAML file.

        Args:
            config_path: Path to save to (optional)
        """
        save_path = config_path or self.config_path or "./cpwm_config.yaml"

        try:
            with open(save_path, "w") as file:
                yaml.dump(self.config, file, default_flow_style=False)
            logger.info(f"Settings saved to {save_path}")
        except OSError as e:
            logger.error(f"Error saving settings to {save_path}: {e}")

    @property
    def output_dir(self) -> Path:
        """Base directory for run artifacts."""
        return Path(self.get("framework.output_dir", "./output"))

    @property
    def log_level(self) -> str:
        return str(self.get("framework.log_level", "INFO")).upper()


# Global settings instance; main.py reloads it when --settings is given
settings = SolverSettings()
