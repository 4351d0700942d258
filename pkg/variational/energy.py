"""Energy functional E, its H_0^1 gradient and the Hessian form."""

from dataclasses import dataclass

import numpy as np

from discretization.function_space import (
    Grid,
    GridFunction,
    GridMismatchError,
    check_same_grid,
    h01_inner,
    h01_norm,
    quadrature,
)
from discretization.green_operator import Nonlinearity, WeightFunction, apply_N


@dataclass(frozen=True, eq=False)
class Problem:
    """Problem data for -u'' = g(t) f(u), u(0) = u(1) = 0."""

    f: Nonlinearity
    g: WeightFunction
    grid: Grid

    def __post_init__(self) -> None:
        if self.g.grid != self.grid:
            raise GridMismatchError(
                f"weight sampled on n={self.g.grid.n}, problem grid has n={self.grid.n}"
            )

    @classmethod
    def build(cls, f: Nonlinearity, g: WeightFunction) -> "Problem":
        return cls(f, g, g.grid)

    def validate(self, radius: float) -> None:
        """Check f on [0, radius]; the embedding sup|u| <= |u|/2 keeps iterates there.

        Raises:
            NonlinearityError: If f fails its sampled invariants or its domain is too small.
        """
        self.f.validate(upper=radius)

    def on_grid(self, grid: Grid) -> "Problem":
        return Problem(self.f, self.g.on_grid(grid), grid)


def energy(p: Problem, u: GridFunction) -> float:
    """E(u) = |u|^2/2 - integral of g F(u)."""
    check_same_grid(u, p.g.samples)
    p.f.check_domain(u.values)
    potential = GridFunction(p.grid, p.g.values * p.f.F(u.values))
    return 0.5 * h01_inner(u, u) - quadrature(potential)


def gradient(p: Problem, u: GridFunction) -> GridFunction:
    """E'(u) = u - N(u) in the H_0^1 Riesz sense."""
    return u - apply_N(u, p.f, p.g)


def gradient_norm(p: Problem, u: GridFunction) -> float:
    return h01_norm(gradient(p, u))


def hessian_form(p: Problem, u: GridFunction, w1: GridFunction, w2: GridFunction) -> float:
    """E''(u)(w1, w2) = (w1, w2) - integral of g f'(u) w1 w2."""
    check_same_grid(u, p.g.samples)
    check_same_grid(w1, w2)
    p.f.check_domain(u.values)
    curvature = p.g.values * p.f.f1(u.values) * w1.values * w2.values
    return h01_inner(w1, w2) - quadrature(GridFunction(p.grid, curvature))


def hessian_diagonal(p: Problem, u: GridFunction) -> np.ndarray:
    """Nodal weights g f'(u) of the zeroth-order part of E''(u)."""
    p.f.check_domain(u.values)
    return p.g.values * p.f.f1(u.values)
