"""Numerical laboratory for decay of the undamped incompressible Oldroyd-B system."""
from . import harness, linear_oracle, littlewood_paley, solver, spectral
from .spectral import Grid, SpectralField

__version__ = "0.1.0"

__all__ = ["Grid", "SpectralField", "spectral", "littlewood_paley", "linear_oracle", "solver",
           "harness"]
