"""
Trajectory Grid Component for Bipolar CPWM

Counter-propagating Lagrangian grids generated by the classical-like
trajectories x_i(s) with dx/ds = v_i(x). All grids of a problem share one shift
time, so the + and - grids of a surface coincide at every multiple of it.
"""

import csv
import math
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicSpline

from .config import settings
from .core import ConfigurationError, TurningPointError
from .potential_models import ScatteringProblem

logger = logging.getLogger(__name__)

_CACHE_LIMIT = 512


def traversal_time(problem: ScatteringProblem, surface: int) -> float:
    """Time T_i for the surface-i trajectory to cross [x_L, x_R]."""
    problem.velocity(surface, np.linspace(problem.x_left, problem.x_right, 257))
    value, _ = quad(
        lambda x: 1.0 / problem.velocity(surface, x),
        problem.x_left,
        problem.x_right,
        epsabs=0.0,
        epsrel=1e-12,
        limit=400,
    )
    return value


class Trajectory:
    """
    One generalized classical trajectory on a surface, leaving x_L at s = 0.

    Integrates y = [x, W] with dx/ds = v(x) and dW/ds = (m/hbar) v(x)^2, so W(x)
    is the action phase (m/hbar) * integral of v from x_L.
    """

    def __init__(
        self,
        problem: ScatteringProblem,
        surface: int,
        t_shift: float,
        count: int,
        rtol: Optional[float] = None,
        atol: Optional[float] = None,
        phase_samples: Optional[int] = None,
    ):
        self.problem = problem
        self.surface = surface
        self.t_shift = float(t_shift)
        self.count = int(count)
        self.s_min = -self.t_shift
        self.s_max = self.count * self.t_shift
        self._cache: Dict[Tuple, Any] = {}

        rtol = rtol or settings.get("trajectory.rtol", 1e-12)
        atol = atol or settings.get("trajectory.atol", 1e-14)
        phase_samples = phase_samples or settings.get("trajectory.phase_samples", 2000)
        scale = problem.mass / problem.hbar

        def rhs(_s: float, y: np.ndarray) -> List[float]:
            v = problem.velocity(surface, y[0])
            return [v, scale * v * v]

        back = solve_ivp(rhs, (0.0, self.s_min), [problem.x_left, 0.0], method="DOP853", rtol=rtol, atol=atol)
        if not back.success:
            raise TurningPointError(f"Backward trajectory on surface {surface + 1} failed: {back.message}")

        forward = solve_ivp(
            rhs,
            (self.s_min, self.s_max),
            back.y[:, -1],
            method="DOP853",
            rtol=rtol,
            atol=atol,
            dense_output=True,
        )
        if not forward.success:
            raise TurningPointError(f"Trajectory on surface {surface + 1} failed: {forward.message}")

        self._solution = forward.sol
        origin = self._solution(0.0)
        self._x_origin_error = float(origin[0] - problem.x_left)
        self._w_origin = float(origin[1])

        s = np.linspace(self.s_min, self.s_max, max(phase_samples, 8 * self.count))
        xs = self.position(s)
        self.x_min = float(xs[0])
        self.x_max = float(xs[-1])
        self._phase_spline = CubicSpline(xs, self.phase(s))

    def position(self, s: Union[float, np.ndarray]) -> np.ndarray:
        """x(s); the origin is pinned so that x(0) = x_L exactly."""
        return self._solution(s)[0] - self._x_origin_error

    def phase(self, s: Union[float, np.ndarray]) -> np.ndarray:
        """W along the trajectory, zero at x_L."""
        return self._solution(s)[1] - self._w_origin

    def phase_at(self, x: Union[float, np.ndarray]) -> np.ndarray:
        """W as a function of position, clamped to the trajectory's range."""
        return self._phase_spline(np.clip(x, self.x_min, self.x_max))

    def velocity(self, x: Union[float, np.ndarray]) -> np.ndarray:
        return np.asarray(self.problem.velocity(self.surface, x))

    def memo(self, key: Tuple, factory: Callable[[], Any]) -> Any:
        """Cache a value derived from this trajectory (positions, local coefficients)."""
        value = self._cache.get(key)
        if value is None:
            if len(self._cache) > _CACHE_LIMIT:
                self._cache.clear()
            value = factory()
            self._cache[key] = value
        return value

    def cached_positions(self, direction: int, tau: float) -> np.ndarray:
        def build() -> np.ndarray:
            positions = self.position(np.arange(self.count) * self.t_shift + direction * tau)
            positions.setflags(write=False)
            return positions

        return self.memo(("positions", direction, float(tau)), build)


@dataclass(frozen=True)
class TrajectoryGrid:
    """
    Moving grid carrying one bipolar component (surface, direction).

    Slot k holds the point at trajectory time k*t_shift + direction*tau, where tau
    is the time since the last completed shift. `shifts` counts completed shifts;
    point labels record which point occupies each slot.
    """

    surface: int
    direction: int
    trajectory: Trajectory = field(repr=False, compare=False)
    shifts: int = 0

    def __post_init__(self):
        if self.direction not in (1, -1):
            raise ConfigurationError(f"Grid direction must be +1 or -1, got {self.direction}")

    @property
    def t_shift(self) -> float:
        return self.trajectory.t_shift

    @property
    def count(self) -> int:
        return self.trajectory.count

    @property
    def sign(self) -> str:
        return "+" if self.direction > 0 else "-"

    @property
    def label(self) -> str:
        return f"{self.surface + 1}{self.sign}"

    def positions(self, tau: float = 0.0) -> np.ndarray:
        """Point positions a time tau after the last completed shift."""
        return self.trajectory.cached_positions(self.direction, tau)

    @property
    def points(self) -> np.ndarray:
        """Positions at the last completed shift (the common site set)."""
        return self.positions(0.0)

    @property
    def velocities(self) -> np.ndarray:
        return self.trajectory.velocity(self.points)

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.points)

    @property
    def labels(self) -> np.ndarray:
        """Identity of the point in each slot; new points get fresh labels as they enter."""
        return np.arange(self.count) - self.direction * self.shifts

    def locate(self, labels: np.ndarray, tau: float = 0.0) -> np.ndarray:
        """Positions of the given point labels, NaN for points outside the grid."""
        slots = np.asarray(labels) + self.direction * self.shifts
        inside = (slots >= 0) & (slots < self.count)
        out = np.full(slots.shape, np.nan)
        out[inside] = self.positions(tau)[slots[inside]]
        return out

    def phase_trend(self, x: Union[float, np.ndarray]) -> np.ndarray:
        """Leading phase of this component, direction * W_i(x)."""
        return self.direction * self.trajectory.phase_at(x)

    def to_rows(self) -> List[Dict[str, float]]:
        return [
            {"slot": k, "label": int(label), "x": float(x), "velocity": float(v)}
            for k, (label, x, v) in enumerate(zip(self.labels, self.points, self.velocities))
        ]


def advance_grid(grid: TrajectoryGrid, steps: int = 1) -> TrajectoryGrid:
    """
    Advance a grid by whole shifts.

    The site set is unchanged; + points move one site right per shift (a new
    point enters at x_L), - points move one site left (a new point enters at the
    right edge).
    """
    if steps < 1:
        raise ConfigurationError(f"advance_grid needs steps >= 1, got {steps}")
    return replace(grid, shifts=grid.shifts + int(steps))


def build_grid(
    problem: ScatteringProblem,
    surface: int,
    N: Optional[int] = None,
    t_shift: Optional[float] = None,
    direction: int = 1,
    trajectory: Optional[Trajectory] = None,
) -> TrajectoryGrid:
    """
    Build the trajectory grid of one component.

    With N given, t_shift = T_i/(N-1) and the grid has exactly N points from x_L
    to x_R. With t_shift given, the point count is the smallest one whose last
    point reaches x_R.

    Args:
        problem: Scattering problem
        surface: Surface index (0-based)
        N: Point count (surface 1 of a multisurface problem)
        t_shift: Shared shift time
        direction: +1 or -1
        trajectory: Reuse an existing trajectory (the +/- grids share one)

    Returns:
        TrajectoryGrid
    """
    if trajectory is None:
        total = traversal_time(problem, surface)
        if t_shift is None:
            if N is None or N < 4:
                raise ConfigurationError(f"Grid needs at least 4 points, got {N}")
            t_shift = total / (N - 1)
            count = int(N)
        else:
            count = int(math.ceil(total / t_shift - 1e-9)) + 1
            if count < 4:
                raise ConfigurationError(
                    f"Surface {surface + 1} grid would have only {count} points; increase N"
                )
        trajectory = Trajectory(problem, surface, t_shift, count)
        logger.debug(
            f"Surface {surface + 1}: traversal {total:.6g} a.u., {count} points, t_shift {t_shift:.6g}"
        )
    return TrajectoryGrid(surface=surface, direction=direction, trajectory=trajectory)


def build_grids(problem: ScatteringProblem, N: int) -> List[TrajectoryGrid]:
    """
    Build all 2f component grids, ordered (1+, 1-, 2+, 2-, ...).

    Surface 1 sets the common shift time T_1/(N-1).
    """
    if N < 4:
        raise ConfigurationError(f"Grid needs at least 4 points, got {N}")

    grids: List[TrajectoryGrid] = []
    t_shift = None
    for surface in range(problem.nsurf):
        plus = build_grid(problem, surface, N=N if t_shift is None else None, t_shift=t_shift, direction=1)
        t_shift = plus.t_shift
        minus = build_grid(problem, surface, direction=-1, trajectory=plus.trajectory)
        grids.extend([plus, minus])
    return grids


def write_grid_csv(grids: List[TrajectoryGrid], path: Union[str, Path]) -> Path:
    """Dump grid positions and velocities for debugging."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=["component", "slot", "label", "x", "velocity"])
        writer.writeheader()
        for grid in grids:
            for row in grid.to_rows():
                writer.writerow({"component": grid.label, **row})
    return path
