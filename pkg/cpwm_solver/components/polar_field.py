"""
Polar Field Component for Bipolar CPWM

Wave components on moving grids and their polar (density / unwrapped phase)
representation. Values are interpolated between incommensurate grids through
natural cubic splines of the density and of the phase left after removing the
component's WKB trend.
"""

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np
from scipy.interpolate import CubicSpline

from .core import InterpolationError
from .trajectory_grid import TrajectoryGrid


@dataclass
class ComponentField:
    """One bipolar component Psi_(i,+/-): its grid and complex values at time tau after the last shift."""

    grid: TrajectoryGrid
    values: np.ndarray
    tau: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (self.grid.count,):
            raise InterpolationError(
                f"Component {self.grid.label} has {self.values.size} values for {self.grid.count} points"
            )

    @property
    def label(self) -> str:
        return self.grid.label

    @property
    def surface(self) -> int:
        return self.grid.surface

    @property
    def direction(self) -> int:
        return self.grid.direction

    @property
    def positions(self) -> np.ndarray:
        return self.grid.positions(self.tau)

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2

    @property
    def phase(self) -> np.ndarray:
        """Continuous phase S: trend plus unwrapped residual."""
        x = self.positions
        trend = self.grid.phase_trend(x)
        return trend + unwrap_residual(self.values, trend)

    def polar(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.density, self.phase

    def interpolant(self) -> "PolarInterpolant":
        return PolarInterpolant(self.positions, self.values, self.grid.phase_trend)


def unwrap_residual(values: np.ndarray, trend: np.ndarray) -> np.ndarray:
    """Phase of values after removing the trend, unwrapped along the grid."""
    return np.unwrap(np.angle(values * np.exp(-1j * trend)))


class PolarInterpolant:
    """
    Natural cubic splines over density and residual phase of one component.

    Targets beyond the extremal source points take the extremal point's value;
    negative interpolated densities are reset to zero.
    """

    def __init__(self, x: np.ndarray, values: np.ndarray, trend):
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=complex)
        if x.size < 4:
            raise InterpolationError(f"Polar interpolation needs at least 4 source points, got {x.size}")
        if np.any(np.diff(x) <= 0):
            raise InterpolationError("Source positions must be strictly increasing")

        self.x = x
        self.values = values
        self.trend = trend
        self.empty = not np.any(values)
        if not self.empty:
            residual = unwrap_residual(values, trend(x))
            self._spline = CubicSpline(x, np.column_stack([np.abs(values) ** 2, residual]), bc_type="natural")

    def density(self, targets: Union[float, np.ndarray]) -> np.ndarray:
        return np.abs(self(targets)) ** 2

    def __call__(self, targets: Union[float, np.ndarray]) -> np.ndarray:
        t = np.asarray(targets, dtype=float)
        out = np.zeros(t.shape, dtype=complex)
        if self.empty:
            return out

        below = t < self.x[0]
        above = t > self.x[-1]
        inside = ~(below | above)
        out[below] = self.values[0]
        out[above] = self.values[-1]

        if np.any(inside):
            evaluated = self._spline(t[inside])
            rho = np.maximum(evaluated[..., 0], 0.0)
            phase = evaluated[..., 1] + self.trend(t[inside])
            out[inside] = np.sqrt(rho) * np.exp(1j * phase)
        return out


def interpolate_polar(source: ComponentField, targets: Union[float, np.ndarray]) -> np.ndarray:
    """
    Interpolate a component onto arbitrary positions through its polar form.

    Args:
        source: Component to interpolate
        targets: Positions (bohr)

    Returns:
        Complex values sqrt(rho) exp(iS) at the targets
    """
    return source.interpolant()(targets)
