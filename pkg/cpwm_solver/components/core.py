"""
Bipolar CPWM - Core Module

Unit constants, unit parsing at the configuration boundary, and the exception
hierarchy shared by every component.
"""

import re
from typing import Union

# Atomic units throughout: hartree, bohr, electron mass, hbar = 1
HARTREE_TO_WAVENUMBER = 219474.6313632
DEFAULT_MASS = 2000.0
DEFAULT_HBAR = 1.0

_ENERGY_PATTERN = re.compile(
    r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(hartree|eh|au|a\.u\.|cm-1|cm\^-1|1/cm|wavenumbers?)?\s*$",
    re.IGNORECASE,
)


class CPWMError(Exception):
    """Base class for all solver errors."""


class ConfigurationError(CPWMError):
    """Invalid model, problem, or run parameters."""


class TurningPointError(ConfigurationError):
    """A trajectory velocity would vanish or become imaginary inside the window."""


class InterpolationError(CPWMError):
    """Polar interpolation could not be carried out."""


class PropagationError(CPWMError):
    """Numerical failure during time relaxation."""


def wavenumber_to_hartree(value: float) -> float:
    """Convert an energy in cm^-1 to hartree."""
    return float(value) / HARTREE_TO_WAVENUMBER


def hartree_to_wavenumber(value: float) -> float:
    """Convert an energy in hartree to cm^-1."""
    return float(value) * HARTREE_TO_WAVENUMBER


def parse_energy(value: Union[str, float, int]) -> float:
    """
    Parse an energy given as a number (hartree) or a string with an optional unit.

    Args:
        value: 0.011, "0.011 hartree" or "150 cm-1"

    Returns:
        Energy in hartree
    """
    if isinstance(value, bool):
        raise ConfigurationError(f"Invalid energy value: {value!r}")
    if isinstance(value, (int, float)):
        return float(value)

    match = _ENERGY_PATTERN.match(str(value))
    if not match:
        raise ConfigurationError(f"Cannot parse energy value: {value!r}")

    magnitude = float(match.group(1))
    unit = (match.group(2) or "hartree").lower()
    if unit in ("cm-1", "cm^-1", "1/cm", "wavenumber", "wavenumbers"):
        return wavenumber_to_hartree(magnitude)
    return magnitude
