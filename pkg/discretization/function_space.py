"""Nodal representation of H_0^1(0,1) on a uniform grid."""

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np
from scipy import integrate


DEFAULT_GRID_CELLS = 400

Scalar = Union[int, float]


class GridMismatchError(ValueError):
    """Raised when two grid functions live on different grids."""


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


@dataclass(frozen=True)
class Grid:
    """Uniform grid t_i = i/n of the unit interval."""

    n: int = DEFAULT_GRID_CELLS

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"grid needs an integer cell count n >= 2, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = np.arange(self.n + 1, dtype=float) / self.n
        nodes.setflags(write=False)
        return nodes

    @cached_property
    def mirrored_nodes(self) -> np.ndarray:
        """Distance min(t_i, 1 - t_i) computed from integer indices, exactly symmetric."""
        index = np.arange(self.n + 1)
        mirrored = np.minimum(index, self.n - index) / self.n
        mirrored.setflags(write=False)
        return mirrored

    @property
    def half_index(self) -> int:
        """Largest node index with t_i <= 1/2."""
        return self.n // 2

    def sample(self, func: Callable[[np.ndarray], np.ndarray], zero_boundary: bool = True) -> "GridFunction":
        """Sample a vectorized function at the nodes.

        Args:
            func: Callable accepting an array of nodes.
            zero_boundary: Force v_0 = v_n = 0.

        Returns:
            The nodal grid function.
        """
        values = np.array(func(self.nodes), dtype=float) * np.ones(self.n + 1)
        if zero_boundary:
            values[0] = 0.0
            values[-1] = 0.0
        return GridFunction(self, values)

    def zeros(self) -> "GridFunction":
        return GridFunction(self, np.zeros(self.n + 1))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Immutable nodal values v_0..v_n on a grid."""

    grid: Grid
    values: np.ndarray

    # numpy scalars defer to __rmul__ instead of broadcasting
    __array_ufunc__ = None

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != (self.grid.n + 1,):
            raise GridMismatchError(
                f"expected {self.grid.n + 1} nodal values, got shape {values.shape}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def has_zero_boundary(self) -> bool:
        return self.values[0] == 0.0 and self.values[-1] == 0.0

    def reflected(self) -> "GridFunction":
        """Return t -> u(1 - t)."""
        return GridFunction(self.grid, self.values[::-1])

    def _other_values(self, other: "GridFunction") -> np.ndarray:
        check_same_grid(self, other)
        return other.values

    def __add__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.grid, self.values + self._other_values(other))

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.grid, self.values - self._other_values(other))

    def __mul__(self, scalar: Scalar) -> "GridFunction":
        return GridFunction(self.grid, self.values * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar: Scalar) -> "GridFunction":
        return GridFunction(self.grid, self.values / float(scalar))

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.grid, -self.values)

    def __repr__(self) -> str:
        return f"GridFunction(n={self.grid.n}, sup={np.max(np.abs(self.values)):.6g})"


def check_same_grid(u: GridFunction, v: GridFunction) -> None:
    """Raise GridMismatchError unless u and v share a grid."""
    if u.grid != v.grid:
        raise GridMismatchError(f"grid mismatch: n={u.grid.n} vs n={v.grid.n}")


def h01_inner(u: GridFunction, v: GridFunction) -> float:
    """H_0^1 inner product of the piecewise-linear interpolants.

    Args:
        u: First grid function.
        v: Second grid function on the same grid.

    Returns:
        Sum over cells of (du/h)(dv/h) h.
    """
    check_same_grid(u, v)
    return float(np.dot(np.diff(u.values), np.diff(v.values)) / u.grid.h)


def h01_norm(u: GridFunction) -> float:
    return float(np.sqrt(max(h01_inner(u, u), 0.0)))


def l2_inner(u: GridFunction, v: GridFunction) -> float:
    """Composite trapezoid value of the integral of u*v."""
    check_same_grid(u, v)
    return float(integrate.trapezoid(u.values * v.values, dx=u.grid.h))


def sup_norm(u: GridFunction) -> float:
    return float(np.max(np.abs(u.values)))


def quadrature(w: GridFunction) -> float:
    """Composite trapezoid integral of nodal data over [0, 1]."""
    return float(integrate.trapezoid(w.values, dx=w.grid.h))


def partial_quadrature(w: GridFunction, a: float, b: float) -> float:
    """Trapezoid integral of w over [a, b] with cells clipped at the cut points.

    Integrand values at non-node cut points are linearly interpolated.

    Args:
        w: Nodal integrand.
        a: Left end, 0 <= a <= b.
        b: Right end, b <= 1.

    Returns:
        Approximation of the integral of w over [a, b].
    """
    if not 0.0 <= a <= b <= 1.0:
        raise DomainError(f"partial_quadrature needs 0 <= a <= b <= 1, got [{a}, {b}]")
    if a == b:
        return 0.0
    nodes = w.grid.nodes
    inner = nodes[(nodes > a) & (nodes < b)]
    points = np.concatenate(([a], inner, [b]))
    values = np.interp(points, nodes, w.values)
    return float(integrate.trapezoid(values, points))
