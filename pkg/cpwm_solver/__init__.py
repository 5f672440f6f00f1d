"""Bipolar counter-propagating wave method (CPWM) scattering solver package."""

__version__ = "0.1.0"
