"""Fiber maps, the Nehari scaling s(u) and projection onto the Nehari set."""

import logging
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from scipy import integrate, optimize

from discretization.function_space import GridFunction, h01_inner, h01_norm
from variational.energy import Problem, gradient, hessian_form


logger = logging.getLogger("nehari_localizer.nehari")

ROOT_TOL_FACTOR = 1e-12
ROOT_RTOL = 4 * np.finfo(float).eps
ROOT_MAX_ITERS = 200
ENDPOINT_WARN_FRACTION = 1e-9
DEGENERATE_FACTOR = 1e-10
MANIFOLD_TOL = 1e-8


class SignPatternViolation(RuntimeError):
    """The fiber derivative does not change sign from + to - across the annulus bracket."""

    def __init__(self, endpoint: str, tau: float, value: float):
        self.endpoint = endpoint
        self.tau = tau
        self.value = value
        super().__init__(
            f"fiber derivative has the wrong sign at the {endpoint} endpoint "
            f"tau={tau:.6g} (value {value:.6g})"
        )


class DegenerateHessian(RuntimeError):
    """E''(u)(u, u) vanishes to working precision."""


@dataclass(frozen=True)
class AnnulusSpec:
    """Annular conical set r <= |u| <= R with Harnack parameter beta."""

    r: float
    R: float
    beta: float

    def __post_init__(self) -> None:
        if not (0.0 < self.r < self.R < math.inf):
            raise ValueError(f"annulus needs 0 < r < R < inf, got r={self.r}, R={self.R}")
        if not 0.0 < self.beta < 0.25:
            raise ValueError(f"annulus needs 0 < beta < 1/4, got beta={self.beta}")

    @property
    def geometric_mean(self) -> float:
        return math.sqrt(self.r * self.R)

    def contains(self, norm: float, strict: bool = False) -> bool:
        if strict:
            return self.r < norm < self.R
        return self.r <= norm <= self.R

    def to_dict(self) -> Dict[str, float]:
        return {"r": self.r, "R": self.R, "beta": self.beta}


@dataclass(frozen=True)
class FiberRootResult:
    s_value: float
    bracket: Tuple[float, float]
    iterations: int
    residual: float
    near_endpoint: bool = False


@dataclass(frozen=True)
class SignPatternSample:
    """Dense-scan evidence for the (h1) sign pattern at one element."""

    holds: bool
    root: Optional[float]
    min_inner_side: Optional[float]
    max_outer_side: Optional[float]
    violation: Optional[str] = None


class _FiberDerivative:
    """tau -> tau |u|^2 - integral of g f(tau u) u, with u-dependent parts cached."""

    def __init__(self, p: Problem, u: GridFunction):
        self.p = p
        self.values = u.values
        self.norm_sq = h01_inner(u, u)
        self.weighted = p.g.values * u.values
        self.h = u.grid.h

    def __call__(self, tau: float) -> float:
        scaled = tau * self.values
        self.p.f.check_domain(scaled)
        load = integrate.trapezoid(self.weighted * self.p.f.f(scaled), dx=self.h)
        return float(tau * self.norm_sq - load)


def fiber_derivative(p: Problem, u: GridFunction, tau: float) -> float:
    """Derivative of tau -> E(tau u).

    Raises:
        ValueError: If tau <= 0.
        DomainError: If tau*u leaves the domain of f.
    """
    if tau <= 0:
        raise ValueError(f"fiber derivative needs tau > 0, got {tau}")
    return _FiberDerivative(p, u)(tau)


def nehari_scale(p: Problem, u: GridFunction, a: AnnulusSpec) -> FiberRootResult:
    """Locate the unique sign change s(u) of the fiber derivative in (r/|u|, R/|u|).

    Args:
        p: Problem data.
        u: Nonzero cone element.
        a: Annulus providing the bracket.

    Returns:
        The root with its bracket, iteration count and residual.

    Raises:
        SignPatternViolation: If the derivative is not positive at r/|u| and negative at R/|u|.
    """
    norm = h01_norm(u)
    if norm == 0.0:
        raise ValueError("the zero function has no Nehari scale")
    lo, hi = a.r / norm, a.R / norm
    fiber = _FiberDerivative(p, u)

    at_lo = fiber(lo)
    if not at_lo > 0.0:
        raise SignPatternViolation("inner", lo, at_lo)
    at_hi = fiber(hi)
    if not at_hi < 0.0:
        raise SignPatternViolation("outer", hi, at_hi)

    found = optimize.root_scalar(
        fiber,
        bracket=(lo, hi),
        method="brentq",
        xtol=np.finfo(float).tiny,
        rtol=ROOT_RTOL,
        maxiter=ROOT_MAX_ITERS,
    )
    if not found.converged:
        raise RuntimeError(f"fiber root did not converge: {found.flag}")

    s_value = float(found.root)
    residual = fiber(s_value)
    tol_root = ROOT_TOL_FACTOR * fiber.norm_sq
    if abs(residual) > tol_root:
        logger.warning("fiber root residual %.3g exceeds %.3g", residual, tol_root)

    margin = ENDPOINT_WARN_FRACTION * (hi - lo)
    near_endpoint = (s_value - lo) < margin or (hi - s_value) < margin
    if near_endpoint:
        logger.warning(
            "Nehari scale %.12g lies within %.1e of the bracket (%.12g, %.12g)",
            s_value, margin, lo, hi,
        )
    return FiberRootResult(s_value, (lo, hi), int(found.iterations), residual, near_endpoint)


def project_with_scale(
    p: Problem, u: GridFunction, a: AnnulusSpec
) -> Tuple[GridFunction, FiberRootResult]:
    root = nehari_scale(p, u, a)
    return u * root.s_value, root


def project(p: Problem, u: GridFunction, a: AnnulusSpec) -> GridFunction:
    """Return s(u) u, the point of the Nehari set on the ray through u."""
    projected, _ = project_with_scale(p, u, a)
    return projected


def scale_directional_derivative(p: Problem, u: GridFunction, v: GridFunction) -> float:
    """Directional derivative of s at a manifold point u along v.

    Raises:
        DegenerateHessian: If |E''(u)(u, u)| < 1e-10 |u|^2.
    """
    curvature = hessian_form(p, u, u, u)
    if abs(curvature) < DEGENERATE_FACTOR * h01_inner(u, u):
        raise DegenerateHessian(f"E''(u)(u, u) = {curvature:.3g} is degenerate")
    return -(hessian_form(p, u, u, v) + h01_inner(gradient(p, u), v)) / curvature


def on_manifold(p: Problem, u: GridFunction, a: AnnulusSpec, tol: float = MANIFOLD_TOL) -> bool:
    norm_sq = h01_inner(u, u)
    if not a.contains(math.sqrt(max(norm_sq, 0.0))):
        return False
    return abs(h01_inner(gradient(p, u), u)) <= tol * norm_sq


def sample_sign_pattern(
    p: Problem, u: GridFunction, a: AnnulusSpec, points: int = 50
) -> SignPatternSample:
    """Scan the fiber derivative on both sides of s(u).

    The derivative must be positive on [r/|u|, s - delta] and negative on
    [s + delta, R/|u|], delta = 1e-6 (R - r)/|u|.
    """
    try:
        root = nehari_scale(p, u, a)
    except SignPatternViolation as exc:
        return SignPatternSample(False, None, None, None, exc.endpoint)

    norm = h01_norm(u)
    lo, hi = root.bracket
    s_value = root.s_value
    delta = 1e-6 * (a.R - a.r) / norm
    fiber = _FiberDerivative(p, u)
    inner = np.linspace(lo, max(lo, s_value - delta), points)
    outer = np.linspace(min(hi, s_value + delta), hi, points)
    min_inner = min(fiber(tau) for tau in inner)
    max_outer = max(fiber(tau) for tau in outer)
    holds = min_inner > 0.0 and max_outer < 0.0
    violation = None
    if not holds:
        violation = "inner-side" if min_inner <= 0.0 else "outer-side"
    return SignPatternSample(holds, s_value, min_inner, max_outer, violation)


def fiber_ratio(p: Problem, u: GridFunction, sigma: Union[float, np.ndarray]) -> Any:
    """h(sigma) = 1 - integral of f(sigma v) g v / sigma, with v = u/|u|.

    Vectorized over sigma; sigma * h(sigma) is the normalized fiber derivative.
    """
    v = u.values / h01_norm(u)
    sigmas = np.atleast_1d(np.asarray(sigma, dtype=float))
    arguments = sigmas[:, None] * v[None, :]
    p.f.check_domain(arguments)
    load = integrate.trapezoid(p.f.f(arguments) * (p.g.values * v)[None, :], dx=u.grid.h, axis=1)
    ratio = 1.0 - load / sigmas
    if np.ndim(sigma) == 0:
        return float(ratio[0])
    return ratio
