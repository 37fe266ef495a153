"""Finite-volume solver for a three-species reaction-cross-diffusion system
and its fast-reaction limit."""

from .fastlimit import SweepConfig, eps_sweep, reference_config, solve_limit_system, well_prepared_init
from .grid import Grid1D
from .maps import DivergenceError, F_inverse, g_inverse, reconstruct
from .model import ModelFunctions, PowerLawParams, build_power_law, identity_model
from .stepper import SchemeParams, State, run

__all__ = [
    "DivergenceError",
    "F_inverse",
    "Grid1D",
    "ModelFunctions",
    "PowerLawParams",
    "SchemeParams",
    "State",
    "SweepConfig",
    "build_power_law",
    "eps_sweep",
    "g_inverse",
    "identity_model",
    "reconstruct",
    "reference_config",
    "run",
    "solve_limit_system",
    "well_prepared_init",
]
