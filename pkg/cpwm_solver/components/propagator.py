"""
Propagator Component for Bipolar CPWM

Coupled Lagrangian time evolution of the 2f bipolar components, boundary
injection, fixed-step and adaptive Runge-Kutta stepping, and the relaxation loop
that drives the components to the stationary scattering state.
"""

import math
import time
import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from . import observables
from .config import settings
from .core import ConfigurationError, PropagationError, TurningPointError
from .integrators import CashKarpStepper, rk4_step
from .polar_field import ComponentField, PolarInterpolant, interpolate_polar
from .potential_models import ScatteringProblem, validate_problem
from .trajectory_grid import TrajectoryGrid, advance_grid, build_grids, traversal_time

logger = logging.getLogger(__name__)

__all__ = [
    "ComponentField",
    "PropagationState",
    "RelaxationConfig",
    "initial_state",
    "interpolate_polar",
    "rhs_general",
    "rhs_symmetric",
    "step_rk4",
    "step_cash_karp",
    "relax_to_stationary",
]

SCHEMES = ("general", "phase_modified")
INTEGRATORS = ("rk4", "cash_karp")


@dataclass
class PropagationState:
    """
    Complete relaxation state.

    Components are ordered (1+, 1-, 2+, 2-, ...). `tau` is the time since the
    last completed shift and `shifts` the number of completed shifts, so
    t = shifts * t_shift + tau.
    """

    problem: ScatteringProblem
    components: List[ComponentField]
    t: float = 0.0
    tau: float = 0.0
    shifts: int = 0
    phi: float = 0.0
    scheme: str = "general"

    @property
    def energy(self) -> float:
        return self.problem.energy

    @property
    def mass(self) -> float:
        return self.problem.mass

    @property
    def hbar(self) -> float:
        return self.problem.hbar

    @property
    def t_shift(self) -> float:
        return self.components[0].grid.t_shift

    @property
    def grids(self) -> List[TrajectoryGrid]:
        return [component.grid for component in self.components]

    def component(self, surface: int, direction: int) -> ComponentField:
        return self.components[2 * surface + (0 if direction > 0 else 1)]

    def pack(self) -> np.ndarray:
        return np.concatenate([component.values for component in self.components])

    def unpack(self, y: np.ndarray, tau: float) -> "PropagationState":
        """New state with values from a flat vector, at sub-shift time tau."""
        components = []
        start = 0
        for component in self.components:
            stop = start + component.grid.count
            components.append(ComponentField(component.grid, y[start:stop], tau))
            start = stop
        return replace(self, components=components, tau=tau, t=self.shifts * self.t_shift + tau)

    def pinned_value(self, t: Optional[float] = None) -> complex:
        """Value of Psi_1+ entering at x_L at time t."""
        t = self.t if t is None else t
        phi = self.energy * t / self.hbar
        if self.scheme == "phase_modified":
            return complex(np.exp(-2j * phi))
        return complex(np.exp(-1j * phi))


@dataclass
class RelaxationConfig:
    """Numerical parameters of one relaxation run."""

    N: int
    t_max: float
    integrator: str = "cash_karp"
    scheme: str = "general"
    steps_per_shift: int = 1
    delta: Optional[float] = None
    epsilon: float = field(default_factory=lambda: settings.get("propagation.epsilon", 1e-6))
    p_tol: float = field(default_factory=lambda: settings.get("propagation.p_tol", 1e-6))
    convergence_window: int = field(default_factory=lambda: settings.get("propagation.convergence_window", 10))
    min_time_factor: float = field(default_factory=lambda: settings.get("propagation.min_time_factor", 1.0))
    first_step_fraction: float = field(
        default_factory=lambda: settings.get("propagation.first_step_fraction", 0.01)
    )
    min_step_fraction: float = field(
        default_factory=lambda: settings.get("propagation.min_step_fraction", 1e-12)
    )
    snapshot_every: int = field(default_factory=lambda: settings.get("propagation.snapshot_every", 0))
    stop_on_convergence: bool = True

    def __post_init__(self):
        if self.integrator not in INTEGRATORS:
            raise ConfigurationError(f"Unknown integrator '{self.integrator}'")
        if self.scheme not in SCHEMES:
            raise ConfigurationError(f"Unknown scheme '{self.scheme}'")
        if self.N < 4:
            raise ConfigurationError(f"N must be at least 4, got {self.N}")
        if self.steps_per_shift < 1:
            raise ConfigurationError("steps_per_shift must be a positive integer")
        if self.delta is not None and self.delta <= 0:
            raise ConfigurationError("delta must be positive")
        if self.t_max <= 0 or self.epsilon <= 0 or self.p_tol <= 0:
            raise ConfigurationError("t_max, epsilon and p_tol must be positive")


@dataclass
class _LocalTerms:
    """Position-dependent coefficients of one component at one sub-shift time."""

    positions: np.ndarray
    self_coef: np.ndarray
    partner_coef: np.ndarray
    cross_coef: Dict[int, np.ndarray]


def _correction(problem: ScatteringProblem, surface: int, x: np.ndarray) -> Tuple[np.ndarray, ...]:
    """V_eff, its log-derivative ratio u = V_eff'/(E - V_eff), and C_i."""
    veff, d1, d2 = problem.model.effective_derivatives(surface, x)
    kinetic = problem.energy - veff
    if np.any(kinetic <= 0.0):
        raise TurningPointError(f"Turning point on surface {surface + 1} inside the trajectory range")
    u = d1 / kinetic
    w = d2 / kinetic
    correction = (problem.hbar ** 2 / (2.0 * problem.mass)) * (0.3125 * u * u + 0.25 * w)
    return veff, kinetic, u, correction


def correction_term(problem: ScatteringProblem, surface: int, x: np.ndarray) -> np.ndarray:
    """C_i(x) built from exact derivatives of the effective potential."""
    return _correction(problem, surface, np.asarray(x, dtype=float))[3]


def _local_terms(problem: ScatteringProblem, grid: TrajectoryGrid, tau: float, scheme: str) -> _LocalTerms:
    def build() -> _LocalTerms:
        x = grid.positions(tau)
        i = grid.surface
        model = problem.model
        ih = 1j / problem.hbar
        vii = np.asarray(model.potential(i, i, x)) + 0.0 * x

        if scheme == "phase_modified":
            self_coef = -ih * vii
            partner_coef = -ih * vii
        else:
            veff, kinetic, u, correction = _correction(problem, i, x)
            speed = np.sqrt(2.0 * kinetic / problem.mass)
            self_coef = grid.direction * 0.25 * speed * u + ih * (problem.energy - vii - veff + correction)
            partner_coef = -ih * (vii - veff - correction)

        cross = {}
        for j in range(model.nsurf):
            if j != i and not model.matrix[i][j].is_zero:
                cross[j] = -ih * (np.asarray(model.potential(i, j, x)) + 0.0 * x)
        return _LocalTerms(x, self_coef, partner_coef, cross)

    return grid.trajectory.memo(("terms", scheme, grid.direction, float(tau)), build)


def _evaluate_rhs(state: PropagationState, scheme: str) -> List[np.ndarray]:
    problem = state.problem
    interpolants: Dict[int, PolarInterpolant] = {}

    def source(index: int) -> PolarInterpolant:
        if index not in interpolants:
            interpolants[index] = state.components[index].interpolant()
        return interpolants[index]

    derivatives = []
    for index, component in enumerate(state.components):
        terms = _local_terms(problem, component.grid, state.tau, scheme)
        x = terms.positions
        partner = index + 1 if component.direction > 0 else index - 1
        rate = terms.self_coef * component.values + terms.partner_coef * source(partner)(x)
        for j, coef in terms.cross_coef.items():
            rate = rate + coef * (source(2 * j)(x) + source(2 * j + 1)(x))
        derivatives.append(rate)
    return derivatives


def rhs_general(state: PropagationState) -> List[np.ndarray]:
    """
    Lagrangian time derivatives of every component on its own grid.

    Combines the amplitude term +/-(v/4) V_eff'/(E - V_eff), the self term
    (i/hbar)(E - V_ii - V_eff + C), the +/- partner term -(i/hbar)(V_ii - V_eff - C)
    and the intersurface terms -(i/hbar) V_ij (Psi_j+ + Psi_j-). Partner and
    cross-surface values come from polar interpolation.
    """
    return _evaluate_rhs(state, "general")


def rhs_symmetric(state: PropagationState) -> List[np.ndarray]:
    """
    Time derivatives of the phase-redefined components Psi~ = Psi exp(-iEt/hbar)
    for asymptotically symmetric problems: -(i/hbar) sum_j V_ij (Psi~_j+ + Psi~_j-).
    """
    if not state.problem.model.is_asymptotically_symmetric():
        raise ConfigurationError(
            "The phase-modified scheme needs V_iL = V_iR = 0 and V_eff_i = 0 on every surface"
        )
    return _evaluate_rhs(state, "phase_modified")


def _flat_rhs(state: PropagationState) -> Callable[[float, np.ndarray], np.ndarray]:
    evaluate = rhs_symmetric if state.scheme == "phase_modified" else rhs_general

    def f(tau: float, y: np.ndarray) -> np.ndarray:
        return np.concatenate(evaluate(state.unpack(y, tau)))

    return f


def initial_state(
    problem: ScatteringProblem, grids: List[TrajectoryGrid], scheme: str = "general"
) -> PropagationState:
    """
    WKB start: Psi_1+ = sqrt(v_1(x_L)/v_1(x)) exp(iW_1(x)), every other component zero.
    """
    if scheme not in SCHEMES:
        raise ConfigurationError(f"Unknown scheme '{scheme}'")
    if len(grids) != problem.component_count:
        raise ConfigurationError(f"Expected {problem.component_count} grids, got {len(grids)}")

    components = []
    for grid in grids:
        values = np.zeros(grid.count, dtype=complex)
        if grid.surface == 0 and grid.direction > 0:
            trajectory = grid.trajectory
            s = np.arange(grid.count) * grid.t_shift
            speed = trajectory.velocity(grid.points)
            amplitude = np.sqrt(problem.velocity(0, problem.x_left) / speed)
            values = amplitude * np.exp(1j * trajectory.phase(s))
        components.append(ComponentField(grid, values, 0.0))

    if scheme == "phase_modified" and not problem.model.is_asymptotically_symmetric():
        raise ConfigurationError(
            "The phase-modified scheme needs V_iL = V_iR = 0 and V_eff_i = 0 on every surface"
        )
    return PropagationState(problem=problem, components=components, scheme=scheme)


def apply_boundary(state: PropagationState) -> PropagationState:
    """Pin Psi_1+ at x_L, zero the other entering + values and the entering - values."""
    for component in state.components:
        if component.direction > 0:
            component.values[0] = state.pinned_value() if component.surface == 0 else 0.0
        else:
            component.values[-1] = 0.0
    return state


def complete_shift(state: PropagationState) -> PropagationState:
    """
    Finish a shift: every point has moved onto its neighbour's site, so values
    move one slot and new points enter at the window edges.
    """
    shifts = state.shifts + 1
    components = []
    for component in state.components:
        values = np.empty_like(component.values)
        if component.direction > 0:
            values[1:] = component.values[:-1]
        else:
            values[:-1] = component.values[1:]
        components.append(ComponentField(advance_grid(component.grid), values, 0.0))

    t = shifts * state.t_shift
    new_state = replace(
        state,
        components=components,
        shifts=shifts,
        tau=0.0,
        t=t,
        phi=state.energy * t / state.hbar,
    )
    return apply_boundary(new_state)


def _check_finite(y: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(y)):
        raise PropagationError(f"Non-finite component values at t={t:.6g}")


def _advance(state: PropagationState, y: np.ndarray, tau: float) -> PropagationState:
    _check_finite(y, state.t)
    if tau >= state.t_shift * (1.0 - 1e-12):
        return complete_shift(state.unpack(y, state.t_shift))
    return state.unpack(y, tau)


def step_rk4(state: PropagationState, delta: float) -> PropagationState:
    """
    One classical RK4 step; delta must divide the shift time.

    The step ends on a shift boundary when tau reaches t_shift, in which case the
    grids advance and boundary values are reapplied.
    """
    remaining = state.t_shift - state.tau
    if delta > remaining * (1.0 + 1e-12):
        raise ConfigurationError(f"RK4 step {delta:.6g} crosses the shift boundary ({remaining:.6g} left)")
    y = rk4_step(_flat_rhs(state), state.tau, state.pack(), delta)
    return _advance(state, y, state.tau + delta)


def step_cash_karp(
    state: PropagationState, stepper: CashKarpStepper, h: float
) -> Tuple[PropagationState, float, float]:
    """
    One accepted adaptive step, never crossing the end of the current shift.

    Returns:
        (new state, step used, proposed next step)
    """
    remaining = state.t_shift - state.tau
    y, used, proposal = stepper.step(_flat_rhs(state), state.tau, state.pack(), h, limit=remaining)
    return _advance(state, y, state.tau + used), used, proposal


def _converged(history: List[List[float]], window: int, p_tol: float) -> Tuple[bool, float]:
    if len(history) <= window:
        return False, math.inf
    recent = np.array(history[-(window + 1):])
    change = float(np.max(np.ptp(recent, axis=0)))
    return change < p_tol, change


def relax_to_stationary(
    problem: ScatteringProblem,
    config: RelaxationConfig,
    on_snapshot: Optional[Callable[[PropagationState], None]] = None,
) -> Tuple["observables.ScatteringResult", PropagationState]:
    """
    Propagate from the WKB start until the probabilities stop changing or t_max.

    Args:
        problem: Validated scattering problem
        config: Numerical parameters
        on_snapshot: Called with the state every config.snapshot_every shifts

    Returns:
        (ScatteringResult, final PropagationState)
    """
    report = validate_problem(problem)
    if not report.passed:
        raise TurningPointError("; ".join(report.failures))

    cpu_start = time.process_time()
    wall_start = time.perf_counter()

    grids = build_grids(problem, config.N)
    state = initial_state(problem, grids, config.scheme)
    t_shift = state.t_shift
    min_time = config.min_time_factor * max(traversal_time(problem, i) for i in range(problem.nsurf))

    logger.info(
        f"Relaxing {problem.model.name} at E={problem.energy:.6g}: N={config.N}, "
        f"t_shift={t_shift:.6g}, integrator={config.integrator}, scheme={config.scheme}"
    )

    stepper = None
    steps_per_shift = config.steps_per_shift
    if config.delta is not None:
        steps_per_shift = max(1, int(round(t_shift / config.delta)))
    h = t_shift / steps_per_shift
    if config.integrator == "cash_karp":
        stepper = CashKarpStepper(
            tolerance=config.epsilon,
            min_step=t_shift * config.min_step_fraction,
            max_step=t_shift,
            max_rejections=settings.get("propagation.max_rejections", 50),
        )
        h = t_shift * config.first_step_fraction

    history_rows: List[Dict[str, float]] = []
    history: List[List[float]] = []
    converged = False
    change = math.inf

    def record(current: PropagationState) -> None:
        refl, trans = observables.edge_probabilities(current)
        history.append(refl + trans)
        history_rows.append(observables.history_row(current.t, refl, trans))

    record(state)
    if on_snapshot and config.snapshot_every:
        on_snapshot(state)

    while state.t < config.t_max - 1e-9 * t_shift:
        shifts_before = state.shifts
        if stepper is None:
            state = step_rk4(state, h)
        else:
            state, _, h = step_cash_karp(state, stepper, h)

        if state.shifts == shifts_before:
            continue

        record(state)
        if on_snapshot and config.snapshot_every and state.shifts % config.snapshot_every == 0:
            on_snapshot(state)

        if state.t >= min_time:
            converged, change = _converged(history, config.convergence_window, config.p_tol)
            logger.debug(f"shift {state.shifts}: t={state.t:.6g}, max change {change:.3g}")
            if converged and config.stop_on_convergence:
                break

    if not converged:
        logger.warning(
            f"{problem.model.name} at E={problem.energy:.6g} not converged by t={state.t:.6g} "
            f"(last window change {change:.3g}, p_tol {config.p_tol:g})"
        )

    result = observables.probabilities(state)
    result.converged = converged
    result.history = history_rows
    result.diagnostics.update(
        {
            "t_final": state.t,
            "shifts": state.shifts,
            "t_shift": t_shift,
            "grid_points": [grid.count for grid in state.grids[::2]],
            "last_window_change": change if math.isfinite(change) else None,
            "cpu_time": time.process_time() - cpu_start,
            "wall_time": time.perf_counter() - wall_start,
            "model": problem.model.name,
            "energy": problem.energy,
            "integrator": config.integrator,
            "scheme": config.scheme,
        }
    )
    if stepper is None:
        result.diagnostics["steps_per_shift"] = steps_per_shift
        result.diagnostics["delta"] = h
    if stepper is not None:
        result.diagnostics["accepted_steps"] = list(stepper.accepted)
        result.diagnostics["rejected_steps"] = stepper.rejected

    logger.info(
        f"Finished {problem.model.name}: P_refl={result.P_refl}, P_trans={result.P_trans}, "
        f"converged={converged}, {result.diagnostics['cpu_time']:.3g} s CPU"
    )
    return result, state
