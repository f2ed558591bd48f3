"""Bohmian arrival times of a spin-1/2 particle released into a waveguide."""

__version__ = "0.1.0"

from .dynamics import SolverConfig, integrate_trajectory, velocity
from .ensemble import run_ensemble, summarize
from .propagator import NodeProximityError, w_and_prime, w_evolution
from .state import SpinOrientation, UnitSystem, WaveguideParams

__all__ = [
    "__version__",
    "SolverConfig",
    "SpinOrientation",
    "UnitSystem",
    "WaveguideParams",
    "NodeProximityError",
    "integrate_trajectory",
    "run_ensemble",
    "summarize",
    "velocity",
    "w_and_prime",
    "w_evolution",
]
