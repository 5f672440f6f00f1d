"""
Run Configuration Component for Bipolar CPWM

Validated per-run parameters, the published benchmark run presets, and the
conversion of a run description into scattering problems and relaxation
settings.
"""

import json
import math
import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional, Any, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing_extensions import Self

from .config import settings
from .core import ConfigurationError, parse_energy
from .potential_models import BENCHMARKS, DiabaticModel, ScatteringProblem, load_model, make_benchmark
from .propagator import RelaxationConfig

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# Grid sizes, windows, step ratios and run lengths of the published benchmark runs.
# The deep-tunnelling Eckart B grids are denser than published (calibrated width),
# and eckart_a_adaptive is the Cash-Karp counterpart of eckart_a.
PRESETS: Dict[str, Dict[str, Any]] = {
    "eckart_a": {
        "benchmark": "eckart_a", "energy": "400 cm-1", "N": 20, "x_left": -2.0, "x_right": 2.0,
        "integrator": "rk4", "steps_per_shift": 1, "t_max": 3899.0,
    },
    "eckart_a_adaptive": {
        "benchmark": "eckart_a", "energy": "400 cm-1", "N": 20, "x_left": -2.0, "x_right": 2.0,
        "integrator": "cash_karp", "epsilon": 1e-6, "t_max": 3899.0,
    },
    "eckart_a_high": {
        "benchmark": "eckart_a", "energy": "400 cm-1", "N": 800, "x_left": -4.0, "x_right": 4.0,
        "integrator": "rk4", "steps_per_shift": 3, "t_max": 11867.0, "p_tol": 1e-14,
    },
    "eckart_b": {
        "benchmark": "eckart_b", "energy": 0.011, "N": 25, "x_left": -2.6, "x_right": 2.1,
        "integrator": "rk4", "steps_per_shift": 3, "t_max": 2893.0,
    },
    "eckart_b_0.4": {
        "benchmark": "eckart_b", "energy": 0.0044, "N": 121, "x_left": -3.5, "x_right": 4.0,
        "integrator": "rk4", "steps_per_shift": 4, "t_max": 43978.0,
    },
    "eckart_b_0.1": {
        "benchmark": "eckart_b", "energy": 0.0011, "N": 240, "x_left": -3.5, "x_right": 3.5,
        "integrator": "rk4", "steps_per_shift": 2, "t_max": 428621.0, "p_tol": 1e-14,
    },
    "uphill_ramp": {
        "benchmark": "uphill_ramp", "energy": 0.0023, "N": 19, "x_left": -1.5, "x_right": 2.2,
        "integrator": "rk4", "steps_per_shift": 2, "t_max": 5792.0,
    },
    "barrier_ramp": {
        "benchmark": "barrier_ramp", "energy": 0.0023, "N": 15, "x_left": -1.5, "x_right": 2.0,
        "integrator": "rk4", "steps_per_shift": 2, "t_max": 7000.0,
    },
    "double_barrier": {
        "benchmark": "double_barrier", "energy": 0.0014, "N": 20, "x_left": -2.2, "x_right": 2.2,
        "integrator": "rk4", "steps_per_shift": 1, "t_max": 39143.0,
    },
    "pure_coupling": {
        "benchmark": "pure_coupling", "energy": "100 cm-1", "N": 61, "x_left": -3.0, "x_right": 3.0,
        "integrator": "cash_karp", "epsilon": 1e-6, "t_max": 50000.0,
    },
    "tully1": {
        "benchmark": "tully1", "energy": 0.11, "N": 50, "x_left": -3.0, "x_right": 3.0,
        "integrator": "cash_karp", "epsilon": 1e-6, "t_max": 1000.0,
    },
    "tully2": {
        "benchmark": "tully2", "energy": math.exp(-2.0), "N": 250, "x_left": -8.0, "x_right": 8.0,
        "integrator": "cash_karp", "epsilon": 1e-5, "t_max": 5000.0, "p_tol": 1e-5,
    },
}

RUN_FIELDS = (
    "N", "x_left", "x_right", "integrator", "scheme", "steps_per_shift", "delta",
    "epsilon", "t_max", "p_tol", "snapshot_every",
)


class EnergyGrid(BaseModel):
    """Evenly spaced energies, linear or logarithmic."""

    model_config = ConfigDict(extra="forbid")

    start: float
    stop: float
    num: int = Field(ge=1)
    spacing: Literal["linear", "log"] = "linear"

    @field_validator("start", "stop", mode="before")
    @classmethod
    def _parse(cls, value: Any) -> float:
        return parse_energy(value)

    def values(self) -> List[float]:
        if self.spacing == "log":
            if self.start <= 0 or self.stop <= 0:
                raise ConfigurationError("Logarithmic energy grids need positive end points")
            return [float(e) for e in np.geomspace(self.start, self.stop, self.num)]
        return [float(e) for e in np.linspace(self.start, self.stop, self.num)]


class RunConfig(BaseModel):
    """
    Parameters of one solve or scan.

    Exactly one model source is given: a benchmark name, an inline model
    description, or a model file. Unset run parameters come from the preset,
    then from the solver settings.
    """

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    schema_version: int = SCHEMA_VERSION
    preset: Optional[str] = None
    benchmark: Optional[str] = None
    params: Dict[str, Any] = Field(default_factory=dict)
    model: Optional[Dict[str, Any]] = None
    model_file: Optional[str] = None

    energy: Optional[float] = None
    energies: Optional[List[float]] = None
    energy_grid: Optional[EnergyGrid] = None

    N: Optional[int] = Field(default=None, ge=4)
    x_left: Optional[float] = None
    x_right: Optional[float] = None
    integrator: Optional[Literal["rk4", "cash_karp", "phase_modified"]] = None
    scheme: Optional[Literal["general", "phase_modified"]] = None
    steps_per_shift: Optional[int] = Field(default=None, ge=1)
    delta: Optional[float] = Field(default=None, gt=0)
    epsilon: Optional[float] = Field(default=None, gt=0)
    t_max: Optional[float] = Field(default=None, gt=0)
    p_tol: Optional[float] = Field(default=None, gt=0)
    snapshot_every: Optional[int] = Field(default=None, ge=0)

    mass: Optional[float] = Field(default=None, gt=0)
    hbar: Optional[float] = Field(default=None, gt=0)
    output_dir: Optional[str] = None

    @field_validator("energy", mode="before")
    @classmethod
    def _parse_energy(cls, value: Any) -> Optional[float]:
        return None if value is None else parse_energy(value)

    @field_validator("energies", mode="before")
    @classmethod
    def _parse_energies(cls, value: Any) -> Optional[List[float]]:
        if value is None:
            return None
        if isinstance(value, (str, int, float)):
            value = [value]
        return [parse_energy(v) for v in value]

    @field_validator("preset")
    @classmethod
    def _known_preset(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and value not in PRESETS:
            raise ValueError(f"unknown preset '{value}'; available: {', '.join(PRESETS)}")
        return value

    @field_validator("benchmark")
    @classmethod
    def _known_benchmark(cls, value: Optional[str]) -> Optional[str]:
        if value is not None and value not in BENCHMARKS:
            raise ValueError(f"unknown benchmark '{value}'; available: {', '.join(BENCHMARKS)}")
        return value

    @model_validator(mode="after")
    def _consistent(self) -> Self:
        sources = [self.benchmark is not None, self.model is not None, self.model_file is not None]
        if sum(sources) > 1:
            raise ValueError("give only one of benchmark, model or model_file")
        if self.x_left is not None and self.x_right is not None and not self.x_left < self.x_right:
            raise ValueError(f"window must satisfy x_left < x_right, got [{self.x_left}, {self.x_right}]")
        if self.energies is not None and not self.energies:
            raise ValueError("energy grid is empty")
        return self

    @classmethod
    def from_preset(cls, name: str, **overrides: Any) -> "RunConfig":
        """Run description of a named preset with optional overrides."""
        if name not in PRESETS:
            raise ConfigurationError(f"Unknown preset '{name}'. Available: {', '.join(PRESETS)}")
        return cls.model_validate({**PRESETS[name], **overrides, "preset": name})

    @classmethod
    def load(cls, path: Union[str, Path]) -> "RunConfig":
        """Read a run description from a YAML or JSON file, or from a result file that embeds one."""
        path = Path(path)
        if not path.exists():
            raise ConfigurationError(f"Run configuration not found: {path}")
        with open(path, "r") as f:
            data = yaml.safe_load(f) or {}
        if "config" in data and isinstance(data["config"], dict):
            data = data["config"]
        return cls.model_validate(data)

    def save(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            if path.suffix == ".json":
                json.dump(self.model_dump(mode="json"), f, indent=2)
            else:
                yaml.safe_dump(self.model_dump(mode="json", exclude_none=True), f, sort_keys=False)
        return path

    def resolved(self) -> "RunConfig":
        """
        Copy with every run parameter filled in.

        A benchmark without an explicit preset uses the preset of the same name.
        """
        data = self.model_dump(exclude_none=True)
        preset_name = self.preset or (self.benchmark if self.benchmark in PRESETS else None)
        if preset_name:
            preset = PRESETS[preset_name]
            if "model" not in data and "model_file" not in data:
                data.setdefault("benchmark", preset["benchmark"])
            for key in RUN_FIELDS:
                if key in preset and key not in data:
                    data[key] = preset[key]
            if not any(key in data for key in ("energy", "energies", "energy_grid")):
                data["energy"] = preset["energy"]
            data["preset"] = preset_name

        defaults = {
            "integrator": settings.get("propagation.integrator", "cash_karp"),
            "steps_per_shift": settings.get("propagation.steps_per_shift", 1),
            "epsilon": settings.get("propagation.epsilon", 1e-6),
            "p_tol": settings.get("propagation.p_tol", 1e-6),
            "snapshot_every": settings.get("propagation.snapshot_every", 0),
            "mass": settings.get("physics.mass", 2000.0),
            "hbar": settings.get("physics.hbar", 1.0),
            "output_dir": str(settings.output_dir),
        }
        for key, value in defaults.items():
            data.setdefault(key, value)

        resolved = RunConfig.model_validate(data)
        missing = [key for key in ("N", "x_left", "x_right", "t_max") if getattr(resolved, key) is None]
        if resolved.benchmark is None and resolved.model is None and resolved.model_file is None:
            missing.append("benchmark/model")
        if not resolved.energy_values():
            missing.append("energy")
        if missing:
            raise ConfigurationError(f"Run configuration is missing: {', '.join(missing)}")
        return resolved

    def energy_values(self) -> List[float]:
        """The energies to solve at: explicit list, then grid, then the single energy."""
        if self.energies:
            return list(self.energies)
        if self.energy_grid is not None:
            return self.energy_grid.values()
        if self.energy is not None:
            return [self.energy]
        return []

    @property
    def window(self) -> List[float]:
        return [self.x_left, self.x_right]

    def build_model(self) -> DiabaticModel:
        """Diabatic model from the benchmark, inline description or model file."""
        if self.benchmark is not None:
            params = dict(self.params)
            energies = self.energy_values()
            if energies:
                params.setdefault("reference_energy", min(energies))
            return make_benchmark(self.benchmark, params)
        window = (self.x_left, self.x_right) if self.x_left is not None else None
        if self.model is not None:
            return DiabaticModel.from_dict(self.model, window)
        if self.model_file is not None:
            return load_model(self.model_file)
        raise ConfigurationError("No model given: set benchmark, model or model_file")

    def problem(self, energy: Optional[float] = None, model: Optional[DiabaticModel] = None) -> ScatteringProblem:
        """Scattering problem at one energy (default: the first configured energy)."""
        if energy is None:
            energies = self.energy_values()
            if not energies:
                raise ConfigurationError("No energy configured")
            energy = energies[0]
        return ScatteringProblem(
            model=model or self.build_model(),
            energy=energy,
            x_left=self.x_left,
            x_right=self.x_right,
            mass=self.mass if self.mass is not None else settings.get("physics.mass", 2000.0),
            hbar=self.hbar if self.hbar is not None else settings.get("physics.hbar", 1.0),
        )

    def relaxation(self) -> RelaxationConfig:
        """
        Relaxation settings. The "phase_modified" integrator is shorthand for
        adaptive Cash-Karp stepping of the phase-modified equations.
        """
        integrator = self.integrator or settings.get("propagation.integrator", "cash_karp")
        scheme = self.scheme or "general"
        if integrator == "phase_modified":
            integrator, scheme = "cash_karp", "phase_modified"

        kwargs: Dict[str, Any] = {
            "N": self.N,
            "t_max": self.t_max,
            "integrator": integrator,
            "scheme": scheme,
            "steps_per_shift": self.steps_per_shift or 1,
            "delta": self.delta,
        }
        for key in ("epsilon", "p_tol", "snapshot_every"):
            value = getattr(self, key)
            if value is not None:
                kwargs[key] = value
        return RelaxationConfig(**kwargs)
