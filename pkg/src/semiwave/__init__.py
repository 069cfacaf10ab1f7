"""Semiclassical mode analysis, scattering and wave-packet asymptotics for
1+1D autonomous linear PDE systems with analytic matrix coefficients."""

__version__ = "0.1.0"

from . import expr, frame, models, modes, numerics, packet, scatter, stationary, symbol
from .errors import SemiwaveError

__all__ = [
    "__version__", "SemiwaveError",
    "expr", "frame", "models", "modes", "numerics", "packet", "scatter",
    "stationary", "symbol",
]
