"""Nonrelativistic limit of the cubic Klein-Gordon equation on the 2-torus.

Spectral fields, NLS profile solvers, modulated (WKB) approximations of
orders K = 0 and K = 2, a Strang-split Klein-Gordon reference solver and an
experiment harness measuring convergence rates in eps.
"""

from .errors import (
    BlowUpError,
    ConfigurationError,
    InterpolationRefusedError,
    NumericalError,
    TailCheckError,
)
from .spectral import Field, TorusGrid, make_grid, sobolev_norm

__all__ = [
    "BlowUpError",
    "ConfigurationError",
    "Field",
    "InterpolationRefusedError",
    "NumericalError",
    "TailCheckError",
    "TorusGrid",
    "make_grid",
    "sobolev_norm",
]

__version__ = "0.1.0"
