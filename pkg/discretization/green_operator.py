"""Dirichlet Laplacian inverse, Green's kernel and the superposition operator N."""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Mapping, Optional, Sequence, Union

import numpy as np
from scipy import integrate, linalg

from discretization.function_space import (
    DomainError,
    Grid,
    GridFunction,
    check_same_grid,
)


logger = logging.getLogger("nehari_localizer.green_operator")

Evaluator = Callable[[np.ndarray], np.ndarray]
ArrayLike = Union[float, np.ndarray]

SYMMETRY_TOL = 1e-12
MONOTONE_TOL = 1e-12


class NonlinearityError(ValueError):
    """Raised when f violates positivity, monotonicity or derivative consistency."""


class WeightError(ValueError):
    """Raised when g is negative, asymmetric or not nondecreasing on [0, 1/2]."""


def _evaluate(func: Evaluator, x: ArrayLike) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.asarray(func(x), dtype=float) + np.zeros_like(x)


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """The scalar nonlinearity f with its first two derivatives.

    `eval_F` is the antiderivative with F(0) = 0 when a closed form exists;
    otherwise F is integrated numerically.
    """

    eval_f: Evaluator
    eval_f1: Evaluator
    eval_f2: Evaluator
    domain_max: float = math.inf
    eval_F: Optional[Evaluator] = None
    family: str = "custom"
    params: Mapping[str, float] = field(default_factory=dict)

    def f(self, x: ArrayLike) -> np.ndarray:
        return _evaluate(self.eval_f, x)

    def f1(self, x: ArrayLike) -> np.ndarray:
        return _evaluate(self.eval_f1, x)

    def f2(self, x: ArrayLike) -> np.ndarray:
        return _evaluate(self.eval_f2, x)

    def F(self, x: ArrayLike) -> np.ndarray:
        """Antiderivative F(x) = integral of f over [0, x]."""
        if self.eval_F is not None:
            return _evaluate(self.eval_F, x)
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1)
        values, _ = integrate.quad_vec(
            lambda s: self.f(s * flat) * flat, 0.0, 1.0, epsabs=1e-10, epsrel=1e-10
        )
        return np.asarray(values, dtype=float).reshape(x.shape)

    def check_domain(self, values: np.ndarray) -> None:
        """Raise DomainError if any |value| exceeds domain_max."""
        peak = float(np.max(np.abs(values))) if np.size(values) else 0.0
        if peak > self.domain_max:
            raise DomainError(
                f"argument {peak:.6g} exceeds the certified domain of f (domain_max={self.domain_max:.6g})"
            )

    def validate(self, upper: Optional[float] = None, samples: int = 201) -> None:
        """Check positivity, monotonicity and derivative consistency on [0, upper].

        Args:
            upper: Right end of the sampled range. Defaults to domain_max,
                or 1 when f has an unbounded domain.
            samples: Number of sample points.

        Raises:
            NonlinearityError: If any sampled check fails.
        """
        if upper is None:
            upper = self.domain_max if math.isfinite(self.domain_max) else 1.0
        if upper > self.domain_max:
            raise NonlinearityError(
                f"domain_max={self.domain_max:.6g} is smaller than the required range {upper:.6g}"
            )
        xs = np.linspace(0.0, upper, samples)
        values = self.f(xs)
        scale = max(1.0, float(np.max(np.abs(values))))
        if not np.all(np.isfinite(values)):
            raise NonlinearityError("f is not finite on the sampled range")
        if np.min(values) < -MONOTONE_TOL * scale:
            worst = xs[int(np.argmin(values))]
            raise NonlinearityError(f"f is negative at x={worst:.6g}")
        drops = np.diff(values)
        if np.min(drops) < -MONOTONE_TOL * scale:
            worst = xs[int(np.argmin(drops))]
            raise NonlinearityError(f"f is decreasing near x={worst:.6g}")

        points = xs[1:]
        step = 1e-5 * np.maximum(1.0, points)
        self._check_derivative("f'", self.f, self.f1, points, step)
        self._check_derivative("f''", self.f1, self.f2, points, step)

    @staticmethod
    def _check_derivative(
        label: str, func: Evaluator, derivative: Evaluator, points: np.ndarray, step: np.ndarray
    ) -> None:
        central = (func(points + step) - func(points - step)) / (2.0 * step)
        exact = derivative(points)
        scale = max(1.0, float(np.max(np.abs(exact))))
        bad = np.abs(central - exact) > 1e-4 * np.abs(exact) + 1e-8 * scale
        if np.any(bad):
            worst = points[int(np.argmax(bad))]
            raise NonlinearityError(
                f"{label} disagrees with central differences at x={worst:.6g}"
            )

    @classmethod
    def power(cls, a: float, p: float, domain_max: float = math.inf) -> "Nonlinearity":
        """f(x) = a*sign(x)*|x|^p with closed-form antiderivative."""
        if a < 0 or p < 1:
            raise NonlinearityError(f"power family needs a >= 0 and p >= 1, got a={a}, p={p}")

        def f(x: np.ndarray) -> np.ndarray:
            return a * np.sign(x) * np.abs(x) ** p

        def f1(x: np.ndarray) -> np.ndarray:
            return a * p * np.abs(x) ** (p - 1)

        def f2(x: np.ndarray) -> np.ndarray:
            if p == 1:
                return np.zeros_like(x)
            with np.errstate(divide="ignore", invalid="ignore"):
                curvature = a * p * (p - 1) * np.sign(x) * np.abs(x) ** (p - 2)
            if p < 2:
                curvature = np.where(x == 0, np.inf, curvature)
            return curvature

        def F(x: np.ndarray) -> np.ndarray:
            return a * np.abs(x) ** (p + 1) / (p + 1)

        return cls(f, f1, f2, domain_max, F, "power", {"a": a, "p": p})

    @classmethod
    def power_sum(
        cls, a: float, p: float, a2: float, p2: float, domain_max: float = math.inf
    ) -> "Nonlinearity":
        """f(x) = a*x^p + a2*x^p2 (odd extensions)."""
        first = cls.power(a, p)
        second = cls.power(a2, p2)
        return cls(
            lambda x: first.f(x) + second.f(x),
            lambda x: first.f1(x) + second.f1(x),
            lambda x: first.f2(x) + second.f2(x),
            domain_max,
            lambda x: first.F(x) + second.F(x),
            "power_sum",
            {"a": a, "p": p, "a2": a2, "p2": p2},
        )

    @classmethod
    def constant(cls, c: float, domain_max: float = math.inf) -> "Nonlinearity":
        """f(x) = c; c = 0 gives the trivial extension f = 0."""
        if c < 0:
            raise NonlinearityError(f"constant family needs c >= 0, got {c}")
        return cls(
            lambda x: np.full_like(x, c),
            np.zeros_like,
            np.zeros_like,
            domain_max,
            lambda x: c * x,
            "constant",
            {"c": c},
        )


def _step_profile(beta: float, level: float) -> Evaluator:
    return lambda s: np.where(s >= beta, level, 0.0)


def _table_profile(t: Sequence[float], g: Sequence[float]) -> Evaluator:
    knots = np.asarray(t, dtype=float)
    levels = np.asarray(g, dtype=float)
    if knots.ndim != 1 or knots.shape != levels.shape or knots.size < 2:
        raise WeightError("table weight needs matching 't' and 'g' lists of length >= 2")
    if knots[0] != 0.0 or knots[-1] < 0.5 or np.any(np.diff(knots) <= 0):
        raise WeightError("table knots must increase strictly from 0 and reach 1/2")
    return lambda s: np.interp(s, knots, levels)


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """The coefficient g, sampled on a grid and generated from a half-profile.

    g(t) = q(min(t, 1 - t)) for the family profile q on [0, 1/2].
    """

    samples: GridFunction
    family: str
    params: Mapping[str, Any]
    profile: Evaluator = field(repr=False)

    WEIGHT_FAMILIES = ("constant", "step", "table")

    @property
    def grid(self) -> Grid:
        return self.samples.grid

    @property
    def values(self) -> np.ndarray:
        return self.samples.values

    def evaluate(self, t: ArrayLike) -> np.ndarray:
        """Evaluate g at arbitrary points of [0, 1]."""
        t = np.asarray(t, dtype=float)
        return _evaluate(self.profile, np.minimum(t, 1.0 - t))

    def on_grid(self, grid: Grid) -> "WeightFunction":
        return self.from_profile(grid, self.family, self.params, self.profile)

    @classmethod
    def from_profile(
        cls, grid: Grid, family: str, params: Mapping[str, Any], profile: Evaluator
    ) -> "WeightFunction":
        values = _evaluate(profile, grid.mirrored_nodes)
        weight = cls(GridFunction(grid, values), family, dict(params), profile)
        weight.validate()
        return weight

    @classmethod
    def from_family(cls, grid: Grid, family: str, params: Mapping[str, Any]) -> "WeightFunction":
        """Build a weight from a family descriptor.

        Args:
            grid: Grid to sample on.
            family: One of "constant", "step", "table".
            params: Family parameters (level; beta, level; t, g).

        Returns:
            Validated weight function.

        Raises:
            WeightError: If the family is unknown or the parameters are invalid.
        """
        if family == "constant":
            return cls.constant(grid, params.get("level", 1.0))
        if family == "step":
            if "beta" not in params:
                raise WeightError("step weight needs 'beta'")
            return cls.step(grid, params["beta"], params.get("level", 1.0))
        if family == "table":
            if "t" not in params or "g" not in params:
                raise WeightError("table weight needs 't' and 'g'")
            return cls.table(grid, params["t"], params["g"])
        raise WeightError(f"unknown weight family '{family}'")

    @classmethod
    def constant(cls, grid: Grid, level: float = 1.0) -> "WeightFunction":
        level = float(level)
        return cls.from_profile(grid, "constant", {"level": level}, lambda s: np.full_like(s, level))

    @classmethod
    def step(cls, grid: Grid, beta: float, level: float = 1.0) -> "WeightFunction":
        """g = level on [beta, 1 - beta] and 0 elsewhere."""
        if not 0.0 <= beta <= 0.5:
            raise WeightError(f"step weight needs 0 <= beta <= 1/2, got {beta}")
        return cls.from_profile(
            grid, "step", {"beta": float(beta), "level": float(level)}, _step_profile(beta, level)
        )

    @classmethod
    def table(cls, grid: Grid, t: Sequence[float], g: Sequence[float]) -> "WeightFunction":
        return cls.from_profile(
            grid, "table", {"t": list(t), "g": list(g)}, _table_profile(t, g)
        )

    def validate(self) -> None:
        values = self.values
        n = self.grid.n
        if not np.all(np.isfinite(values)):
            raise WeightError("weight is not finite")
        if np.min(values) < 0.0:
            raise WeightError(f"weight is negative (min {np.min(values):.6g})")
        half = values[: self.grid.half_index + 1]
        if half.size > 1 and np.min(np.diff(half)) < -MONOTONE_TOL:
            raise WeightError("weight is not nondecreasing on [0, 1/2]")
        asymmetry = float(np.max(np.abs(values - values[::-1])))
        if asymmetry > SYMMETRY_TOL:
            raise WeightError(f"weight is not symmetric about 1/2 (defect {asymmetry:.3g}, n={n})")

def green_kernel(t: ArrayLike, s: ArrayLike) -> ArrayLike:
    """Green's function of -u'' with Dirichlet conditions on [0, 1].

    Args:
        t: Evaluation point(s) in [0, 1].
        s: Source point(s) in [0, 1].

    Returns:
        s(1 - t) for s <= t, t(1 - s) otherwise.
    """
    t_arr = np.asarray(t, dtype=float)
    s_arr = np.asarray(s, dtype=float)
    if np.any((t_arr < 0) | (t_arr > 1)) or np.any((s_arr < 0) | (s_arr > 1)):
        raise DomainError("green_kernel arguments must lie in [0, 1]")
    value = np.where(s_arr <= t_arr, s_arr * (1.0 - t_arr), t_arr * (1.0 - s_arr))
    if value.ndim == 0:
        return float(value)
    return value


@lru_cache(maxsize=16)
def _laplacian_bands(n: int) -> np.ndarray:
    size = n - 1
    bands = np.empty((3, size))
    bands[0, :] = -1.0
    bands[1, :] = 2.0
    bands[2, :] = -1.0
    bands[0, 0] = 0.0
    bands[2, -1] = 0.0
    bands.setflags(write=False)
    return bands


def apply_inverse_laplacian(w: GridFunction) -> GridFunction:
    """Solve (-u_{i-1} + 2u_i - u_{i+1})/h^2 = w_i with u_0 = u_n = 0."""
    grid = w.grid
    values = np.zeros(grid.n + 1)
    rhs = grid.h ** 2 * w.values[1:-1]
    values[1:-1] = linalg.solve_banded((1, 1), _laplacian_bands(grid.n), rhs)
    return GridFunction(grid, values)


def apply_inverse_laplacian_kernel(w: GridFunction) -> GridFunction:
    """Trapezoid quadrature of the Green's integral at every node (O(n^2))."""
    grid = w.grid
    nodes = grid.nodes
    weights = np.full(grid.n + 1, grid.h)
    weights[[0, -1]] *= 0.5
    kernel = green_kernel(nodes[:, None], nodes[None, :])
    return GridFunction(grid, kernel @ (weights * w.values))


def apply_N(u: GridFunction, f: Nonlinearity, g: WeightFunction) -> GridFunction:
    """N(u) = J^{-1}(g f(u)).

    Raises:
        DomainError: If u leaves the certified domain of f.
    """
    check_same_grid(u, g.samples)
    f.check_domain(u.values)
    return apply_inverse_laplacian(GridFunction(u.grid, g.values * f.f(u.values)))
