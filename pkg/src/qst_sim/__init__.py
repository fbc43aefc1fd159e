"""Quantum state transfer between two mechanical resonators over a lossy optical fiber."""

from .dynamics import Protocol, SystemConfig, build_generator
from .integrator import IntegratorSettings, Method, expm_propagate, propagate
from .pulses import PulseParams

__version__ = "0.1.0"

__all__ = [
    "IntegratorSettings",
    "Method",
    "Protocol",
    "PulseParams",
    "SystemConfig",
    "build_generator",
    "expm_propagate",
    "propagate",
]
