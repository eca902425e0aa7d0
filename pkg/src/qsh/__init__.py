"""Pseudo-spectral simulator for the inertial Qian-Sheng Q-tensor model.

Subpackages map onto the build layers:

params          coefficient sets, admissibility checks, presets
tensor_algebra  pointwise symmetric-traceless algebra
spectral        periodic grids, transforms, differential operators
dynamics        right-hand sides and time steppers for (v, Q, W)
diagnostics     energy functionals, residuals and monitors
twistwave       radial hedgehog wave solver and lifting
io / cli        config files, snapshots, CSV output, batch runs
"""

from .params import Coefficients, ValidationReport, Regime, preset_mbba, validate, validate_coercivity
from .spectral import Grid
from .dynamics import SimState, NonFiniteError, step_rk4, step_mollified, step_ifrk4, cfl_dt

__all__ = [
    "Coefficients",
    "ValidationReport",
    "Regime",
    "preset_mbba",
    "validate",
    "validate_coercivity",
    "Grid",
    "SimState",
    "NonFiniteError",
    "step_rk4",
    "step_mollified",
    "step_ifrk4",
    "cfl_dt",
]

__version__ = "0.1.0"
