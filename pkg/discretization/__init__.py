"""Uniform grids, the discrete H_0^1 geometry and the Green's operator."""

from discretization.function_space import DomainError, Grid, GridFunction, GridMismatchError
from discretization.green_operator import Nonlinearity, NonlinearityError, WeightError, WeightFunction

__all__ = [
    "DomainError",
    "Grid",
    "GridFunction",
    "GridMismatchError",
    "Nonlinearity",
    "NonlinearityError",
    "WeightError",
    "WeightFunction",
]
