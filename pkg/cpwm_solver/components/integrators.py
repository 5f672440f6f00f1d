"""
Integrators Component for Bipolar CPWM

Fixed-step classical Runge-Kutta and the adaptive Cash-Karp 4(5) pair, written
for a right-hand side f(tau, y) over a flat complex state vector.
"""

import math
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple

import numpy as np

from .core import PropagationError

logger = logging.getLogger(__name__)

RHS = Callable[[float, np.ndarray], np.ndarray]


def rk4_step(f: RHS, tau: float, y: np.ndarray, h: float) -> np.ndarray:
    """One classical fourth-order Runge-Kutta step of size h."""
    k1 = f(tau, y)
    k2 = f(tau + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(tau + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(tau + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# Cash-Karp tableau
CK_NODES = np.array([0.0, 1 / 5, 3 / 10, 3 / 5, 1.0, 7 / 8])

CK_STAGES = [
    [1 / 5],
    [3 / 40, 9 / 40],
    [3 / 10, -9 / 10, 6 / 5],
    [-11 / 54, 5 / 2, -70 / 27, 35 / 27],
    [1631 / 55296, 175 / 512, 575 / 13824, 44275 / 110592, 253 / 4096],
]

# fifth-order weights
CK_WEIGHTS = np.array([37 / 378, 0.0, 250 / 621, 125 / 594, 0.0, 512 / 1771])

# fifth minus embedded fourth order
CK_ERROR = np.array([-277 / 64512, 0.0, 6925 / 370944, -6925 / 202752, -277 / 14336, 277 / 7084])


def cash_karp_attempt(f: RHS, tau: float, y: np.ndarray, h: float) -> Tuple[np.ndarray, float]:
    """
    One Cash-Karp trial step.

    Returns:
        (fifth-order solution, max absolute error estimate over all components)
    """
    slopes: List[np.ndarray] = [f(tau, y)]
    for node, row in zip(CK_NODES[1:], CK_STAGES):
        increment = sum(coeff * k for coeff, k in zip(row, slopes))
        slopes.append(f(tau + node * h, y + h * increment))

    y_new = y + h * sum(w * k for w, k in zip(CK_WEIGHTS, slopes) if w != 0.0)
    error = h * sum(e * k for e, k in zip(CK_ERROR, slopes) if e != 0.0)
    return y_new, float(np.max(np.abs(error))) if error.size else 0.0


@dataclass
class CashKarpStepper:
    """
    Adaptive step-size controller around cash_karp_attempt.

    The error ratio is the largest component error over the tolerance; steps are
    accepted when it is at most one. The state is scaled to unit incident
    amplitude, so the absolute norm is used. When the last accepted ratio puts
    the end of the interval within reach (h * ratio^-1/5, without the safety
    factor), the step is stretched to finish the interval.
    """

    tolerance: float
    min_step: float
    max_step: float
    safety: float = 0.9
    max_growth: float = 5.0
    min_growth: float = 0.2
    min_shrink: float = 0.1
    max_rejections: int = 50
    accepted: List[float] = field(default_factory=list)
    rejected: int = 0
    reach: float = 0.0

    def __post_init__(self):
        if self.tolerance <= 0:
            raise PropagationError(f"Cash-Karp tolerance must be positive, got {self.tolerance}")

    def step(
        self, f: RHS, tau: float, y: np.ndarray, h: float, limit: Optional[float] = None
    ) -> Tuple[np.ndarray, float, float]:
        """
        Take one accepted step.

        Args:
            f: Right-hand side
            tau: Current time
            y: Current state
            h: Proposed step size
            limit: Largest step allowed for this call (end of the current shift)

        Returns:
            (new state, step used, proposed next step)
        """
        proposal = min(h, self.max_step)
        h = proposal if limit is None else min(proposal, limit)
        if limit is not None and proposal < limit <= min(self.reach, self.max_step):
            h = limit
        capped = h < proposal

        for _ in range(self.max_rejections):
            y_new, err = cash_karp_attempt(f, tau, y, h)
            if not np.isfinite(err):
                ratio = np.inf
            else:
                ratio = err / self.tolerance

            if ratio <= 1.0:
                growth = self.max_growth if ratio == 0.0 else self.safety * ratio ** -0.2
                h_next = h * min(self.max_growth, max(self.min_growth, growth))
                reach = math.inf if ratio == 0.0 else h * ratio ** -0.2
                if capped:
                    h_next = max(h_next, proposal)
                    reach = max(reach, self.reach)
                self.reach = reach
                self.accepted.append(h)
                logger.debug(f"accepted step {h:.6g} at tau={tau:.6g} (error ratio {ratio:.3g})")
                return y_new, h, min(h_next, self.max_step)

            self.rejected += 1
            shrink = self.min_shrink if not np.isfinite(ratio) else max(self.min_shrink, self.safety * ratio ** -0.25)
            logger.debug(f"rejected step {h:.6g} at tau={tau:.6g} (error ratio {ratio:.3g})")
            h *= shrink
            capped = False
            if h < self.min_step:
                raise PropagationError(f"Step size underflow: {h:.3g} < {self.min_step:.3g} at tau={tau:.6g}")

        raise PropagationError(f"Step rejected {self.max_rejections} times in a row at tau={tau:.6g}")
