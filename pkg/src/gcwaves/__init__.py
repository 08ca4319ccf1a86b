"""Solitary gravity-capillary water waves with constant vorticity.

Computes solitary waves as constrained minimizers of a reduced wave energy
built on a spectral Dirichlet-Neumann solver, and validates them against
closed-form KdV and NLS small-amplitude asymptotics.
"""

from .dispersion import (
    FluidParams,
    LinearWaveData,
    Regime,
    coth_multiplier,
    critical_bond_number,
    dispersion_gap,
    phase_speed,
    solve_bifurcation,
)
from .grid import H0, PeriodicGrid, SurfaceProfile

__all__ = [
    "FluidParams",
    "LinearWaveData",
    "Regime",
    "coth_multiplier",
    "critical_bond_number",
    "dispersion_gap",
    "phase_speed",
    "solve_bifurcation",
    "H0",
    "PeriodicGrid",
    "SurfaceProfile",
]
__version__ = "0.1.0"
