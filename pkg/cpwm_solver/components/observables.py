"""
Observables Component for Bipolar CPWM

Reflection and transmission probabilities, component fluxes, coupling rates,
continuity residuals, summed-density profiles, and Stückelberg phase
diagnostics computed from a propagation state.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Any, Tuple, Union, TYPE_CHECKING

import numpy as np
from scipy.integrate import quad, simpson
from scipy.interpolate import CubicSpline
from scipy.signal import find_peaks

from .core import ConfigurationError
from .potential_models import ScatteringProblem

if TYPE_CHECKING:
    from .propagator import PropagationState

logger = logging.getLogger(__name__)

Label = Union[str, Tuple[int, int]]


@dataclass
class ScatteringResult:
    """Per-surface reflection and transmission probabilities with diagnostics."""

    P_refl: List[float]
    P_trans: List[float]
    converged: bool = False
    history: List[Dict[str, float]] = field(default_factory=list)
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    source: str = "cpwm"

    @property
    def unitarity_defect(self) -> float:
        return float(sum(self.P_refl) + sum(self.P_trans) - 1.0)

    @property
    def nsurf(self) -> int:
        return len(self.P_refl)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "source": self.source,
            "P_refl": list(self.P_refl),
            "P_trans": list(self.P_trans),
            "unitarity_defect": self.unitarity_defect,
            "converged": self.converged,
            "diagnostics": self.diagnostics,
        }


def history_row(t: float, refl: List[float], trans: List[float]) -> Dict[str, float]:
    row = {"t": t}
    for i, value in enumerate(refl):
        row[f"P{i + 1}_refl"] = value
    for i, value in enumerate(trans):
        row[f"P{i + 1}_trans"] = value
    return row


def _component_index(state: "PropagationState", alpha: Label) -> int:
    """Index of a component given as '2-' or (surface, direction) with 0-based surface."""
    if isinstance(alpha, str):
        text = alpha.strip()
        if len(text) < 2 or text[-1] not in "+-":
            raise ConfigurationError(f"Component labels look like '1+' or '2-', got {alpha!r}")
        surface, direction = int(text[:-1]) - 1, (1 if text[-1] == "+" else -1)
    else:
        surface, direction = alpha
    if not 0 <= surface < state.problem.nsurf or direction not in (1, -1):
        raise ConfigurationError(f"No component {alpha!r} in a {state.problem.nsurf}-surface problem")
    return 2 * surface + (0 if direction > 0 else 1)


def edge_probabilities(state: "PropagationState") -> Tuple[List[float], List[float]]:
    """
    P_i^refl = (v_i/v_1L) rho_i-(leftmost point), P_i^trans = (v_i/v_1L) rho_i+(rightmost point).

    Velocities are taken at the extremal grid points themselves.
    """
    problem = state.problem
    v_in = problem.velocity(0, problem.x_left)
    refl, trans = [], []
    for surface in range(problem.nsurf):
        minus = state.component(surface, -1)
        plus = state.component(surface, 1)
        x_minus = minus.positions[0]
        x_plus = plus.positions[-1]
        refl.append(float(problem.velocity(surface, x_minus) / v_in * abs(minus.values[0]) ** 2))
        trans.append(float(problem.velocity(surface, x_plus) / v_in * abs(plus.values[-1]) ** 2))
    return refl, trans


def probabilities(state: "PropagationState", problem: Optional[ScatteringProblem] = None) -> ScatteringResult:
    """
    Reflection and transmission probabilities from the edge values of a state.

    Args:
        state: Propagation state
        problem: Accepted for symmetry with the problem-first call style; must match state.problem

    Returns:
        ScatteringResult (converged flag left False)
    """
    if problem is not None and problem is not state.problem:
        raise ConfigurationError("probabilities() called with a problem that does not match the state")
    refl, trans = edge_probabilities(state)
    return ScatteringResult(P_refl=refl, P_trans=trans, history=[history_row(state.t, refl, trans)])


def component_flux(state: "PropagationState", alpha: Label) -> Tuple[np.ndarray, np.ndarray]:
    """
    Flux j_alpha = +/- v_i rho_alpha on the component's own grid.

    Returns:
        (positions, flux)
    """
    component = state.components[_component_index(state, alpha)]
    x = component.positions
    return x, component.direction * component.grid.trajectory.velocity(x) * component.density


def flux_probabilities(state: "PropagationState") -> Tuple[List[float], List[float]]:
    """Probabilities as flux ratios |j_i-(x_L)|/j_1+(x_L) and j_i+(x_R)/j_1+(x_L)."""
    _, incident = component_flux(state, (0, 1))
    j_in = abs(incident[0])
    refl, trans = [], []
    for surface in range(state.problem.nsurf):
        _, j_minus = component_flux(state, (surface, -1))
        _, j_plus = component_flux(state, (surface, 1))
        refl.append(float(abs(j_minus[0]) / j_in))
        trans.append(float(abs(j_plus[-1]) / j_in))
    return refl, trans


def total_flux_profile(state: "PropagationState", positions: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Sum of all component fluxes, normalized by the incident flux v_1(x_L).

    Defaults to the surface-1 + grid; other components are interpolated.
    Constant in x for a stationary state.
    """
    problem = state.problem
    x = state.component(0, 1).positions if positions is None else np.asarray(positions, dtype=float)
    total = np.zeros_like(x)
    for component in state.components:
        speed = problem.velocity(component.surface, x)
        total += component.direction * speed * component.interpolant().density(x)
    return x, total / problem.velocity(0, problem.x_left)


def summed_density_profile(state: "PropagationState", positions: Optional[np.ndarray] = None) -> Dict[str, np.ndarray]:
    """
    Total transmitted and reflected densities rho_+ = sum_i rho_i+ and rho_- = sum_i rho_i-.

    For asymptotically symmetric problems the difference rho_+ - rho_- is constant
    at convergence and equals the total transmission probability.
    """
    x = state.component(0, 1).positions if positions is None else np.asarray(positions, dtype=float)
    rho_plus = np.zeros_like(x)
    rho_minus = np.zeros_like(x)
    for component in state.components:
        density = component.interpolant().density(x)
        if component.direction > 0:
            rho_plus += density
        else:
            rho_minus += density
    return {"x": x, "rho_plus": rho_plus, "rho_minus": rho_minus, "difference": rho_plus - rho_minus}


def coupling_rate(
    state: "PropagationState", alpha: Label, beta: Label, positions: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Rate of density flow from component beta into alpha:
    (2/hbar)[V_ij - delta_ij (V_eff_i + C_i)] Im[Psi_alpha* Psi_beta].

    Evaluated on the alpha grid unless positions are given; beta (and alpha when
    positions are given) is interpolated.

    Returns:
        (positions, rate)
    """
    from .propagator import correction_term

    a = _component_index(state, alpha)
    b = _component_index(state, beta)
    if a == b:
        raise ConfigurationError("coupling_rate needs two different components")

    problem = state.problem
    source_a = state.components[a]
    source_b = state.components[b]
    i, j = source_a.surface, source_b.surface

    if positions is None:
        x = source_a.positions
        psi_a = source_a.values
    else:
        x = np.asarray(positions, dtype=float)
        psi_a = source_a.interpolant()(x)
    psi_b = source_b.interpolant()(x)

    strength = np.asarray(problem.model.potential(i, j, x)) + 0.0 * x
    if i == j:
        strength = strength - (np.asarray(problem.model.effective[i].value(x)) + correction_term(problem, i, x))
    return x, (2.0 / problem.hbar) * strength * np.imag(np.conj(psi_a) * psi_b)


def window_population(state: "PropagationState", samples: int = 2001) -> float:
    """Integral over [x_L, x_R] of the summed component densities."""
    problem = state.problem
    x = np.linspace(problem.x_left, problem.x_right, samples)
    total = np.zeros_like(x)
    for component in state.components:
        total += component.interpolant().density(x)
    return float(simpson(total, x=x))


def _edge_outflow(state: "PropagationState") -> float:
    problem = state.problem
    edges = np.array([problem.x_left, problem.x_right])
    net = 0.0
    for component in state.components:
        speed = problem.velocity(component.surface, edges)
        flux = component.direction * speed * component.interpolant().density(edges)
        net += flux[1] - flux[0]
    return float(net)


def continuity_residual(
    before: "PropagationState",
    after: "PropagationState",
    samples: int = 2001,
    middle: Optional["PropagationState"] = None,
) -> float:
    """
    Discrete residual of d/dt integral(sum rho) + [sum j] between two close snapshots,
    relative to the incident flux.

    With a middle snapshot halfway between the two, the outflow is integrated in time
    with Simpson's rule instead of the trapezoid rule. Snapshots taken at completed
    shifts share their grid sites, so the window integrals of consecutive shifts carry
    the same interpolation error.

    Args:
        before: Earlier state
        after: Later state
        samples: Quadrature points over the window
        middle: Optional state at the midpoint time

    Returns:
        |dN/dt + net outflow| / v_1(x_L)
    """
    dt = after.t - before.t
    if dt <= 0:
        raise ConfigurationError("continuity_residual needs two snapshots in increasing time order")
    problem = before.problem
    rate = (window_population(after, samples) - window_population(before, samples)) / dt
    if middle is None:
        outflow = 0.5 * (_edge_outflow(before) + _edge_outflow(after))
    else:
        if not math.isclose(middle.t - before.t, 0.5 * dt, rel_tol=1e-9):
            raise ConfigurationError("continuity_residual needs the middle snapshot halfway between the others")
        outflow = (_edge_outflow(before) + 4.0 * _edge_outflow(middle) + _edge_outflow(after)) / 6.0
    return abs(rate + outflow) / problem.velocity(0, problem.x_left)


@dataclass
class StueckelbergPhase:
    """Stückelberg phase difference and the local density-oscillation wavelength."""

    phase: float
    wavelength: float
    x: float


def _momentum(problem: ScatteringProblem, surface: int, x: Union[float, np.ndarray]) -> np.ndarray:
    kinetic = problem.energy - np.asarray(problem.model.potential(surface, surface, x))
    if np.any(kinetic <= 0):
        raise ConfigurationError(f"Channel {surface + 1} is closed inside the integration range")
    return np.sqrt(2.0 * problem.mass * kinetic)


def stueckelberg(problem: ScatteringProblem, x: float = math.inf, x0: float = 0.0) -> StueckelbergPhase:
    """
    Phase difference (1/hbar) integral [p_1 - p_2] dx' accumulated between the two pathways.

    Args:
        problem: Two-surface problem with both channels open
        x: Upper limit; infinity integrates up to x_R and takes the asymptotic
           wavelength from the right-hand levels
        x0: Lower limit, the crossing region (default 0)

    Returns:
        StueckelbergPhase
    """
    if problem.nsurf != 2:
        raise ConfigurationError("Stückelberg phase is defined for two-surface problems")

    def integrand(s: float) -> float:
        return float(_momentum(problem, 0, s) - _momentum(problem, 1, s)) / problem.hbar

    if math.isinf(x):
        phase, _ = quad(integrand, x0, problem.x_right, limit=400)
        gap = abs(problem.asymptotic_momentum(0, "right") - problem.asymptotic_momentum(1, "right"))
    else:
        phase, _ = quad(integrand, x0, x, limit=400)
        gap = abs(float(_momentum(problem, 0, x) - _momentum(problem, 1, x)))

    wavelength = math.inf if gap == 0.0 else 2.0 * math.pi * problem.hbar / gap
    return StueckelbergPhase(phase=float(phase), wavelength=wavelength, x=x)


def oscillation_wavelength(
    x: np.ndarray,
    density: np.ndarray,
    x_min: Optional[float] = None,
    x_max: Optional[float] = None,
    samples: int = 4001,
) -> float:
    """
    Mean spacing of density maxima and minima, resampled through a natural spline.

    Returns:
        Measured wavelength (bohr), NaN when fewer than two extrema are found
    """
    x = np.asarray(x, dtype=float)
    density = np.asarray(density, dtype=float)
    lo = x[0] if x_min is None else max(x_min, x[0])
    hi = x[-1] if x_max is None else min(x_max, x[-1])
    fine = np.linspace(lo, hi, samples)
    curve = CubicSpline(x, density, bc_type="natural")(fine)

    spacings = []
    for signal in (curve, -curve):
        peaks, _ = find_peaks(signal)
        if peaks.size >= 2:
            spacings.extend(np.diff(fine[peaks]))
    if not spacings:
        return math.nan
    return float(np.mean(spacings))


def density_snapshot(state: "PropagationState") -> List[Dict[str, float]]:
    """Rows of (component, x, rho, S) for plotting."""
    rows = []
    for component in state.components:
        rho, phase = component.polar()
        for x, r, s in zip(component.positions, rho, phase):
            rows.append({"t": state.t, "component": component.label, "x": float(x), "rho": float(r), "S": float(s)})
    return rows
