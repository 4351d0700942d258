"""Independent checks of candidate solutions: ODE residual and a shooting oracle."""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from discretization.function_space import GridFunction, h01_norm, sup_norm
from variational.cone import ConeReport, cone_membership, symmetry_defect
from variational.energy import Problem, gradient_norm
from variational.nehari import AnnulusSpec, on_manifold


logger = logging.getLogger("nehari_localizer.verify_oracle")

DEFAULT_REFINE = 4
DEFAULT_SLOPE_STEPS = 2000
SLOPE_RANGE_FACTOR = 4.0
SHOOT_TOL = 1e-10
MAX_HALVINGS = 200
RESIDUAL_ORDER_FACTOR = 50.0
AGREEMENT_TOL = 1e-3
SHOOTING_SYMMETRY_TOL = 1e-6


class NoRootInRange(RuntimeError):
    """The slope scan bracketed no sign change of u(1; slope)."""


@dataclass(frozen=True)
class ShootingResult:
    slope: float
    u: GridFunction
    boundary_miss: float
    valid: bool = True

    @property
    def positive(self) -> bool:
        return bool(np.all(self.u.values[1:-1] > 0.0))

    @property
    def norm(self) -> float:
        return h01_norm(self.u)


def residual(p: Problem, u: GridFunction) -> float:
    """Max over interior nodes of |-(second difference of u) - g f(u)|."""
    values = u.values
    if values.size < 3:
        return 0.0
    h = u.grid.h
    second = (-values[:-2] + 2.0 * values[1:-1] - values[2:]) / h ** 2
    load = p.g.values[1:-1] * p.f.f(values[1:-1])
    return float(np.max(np.abs(second - load)))


def residual_bound(p: Problem, u: GridFunction) -> float:
    """50 h^2 max |g f(u)|, the acceptance level for a second-order scheme."""
    load = p.g.values * p.f.f(u.values)
    return RESIDUAL_ORDER_FACTOR * u.grid.h ** 2 * float(np.max(np.abs(load)))


class _Integrator:
    """Classic RK4 for u'' = -g(t) f(u), vectorized over initial slopes."""

    def __init__(self, p: Problem, refine: int):
        self.f = p.f
        self.cells = p.grid.n * refine
        self.refine = refine
        self.H = 1.0 / self.cells
        fine = np.arange(self.cells + 1) / self.cells
        self.g_nodes = p.g.evaluate(fine)
        self.g_mid = p.g.evaluate((np.arange(self.cells) + 0.5) / self.cells)
        self.limit = p.f.domain_max

    def _load(self, y: np.ndarray, g_value: float, valid: np.ndarray) -> np.ndarray:
        if math.isfinite(self.limit):
            valid &= np.abs(y) <= self.limit
            y = np.clip(y, -self.limit, self.limit)
        return -g_value * self.f.f(y)

    def run(
        self, slopes: np.ndarray, keep_profile: bool = False
    ) -> Tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
        y = np.zeros_like(slopes)
        v = np.array(slopes, dtype=float)
        valid = np.ones(slopes.shape, dtype=bool)
        profile = np.empty((self.cells + 1, slopes.size)) if keep_profile else None
        if keep_profile:
            profile[0] = y
        H = self.H
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(self.cells):
                g0, gm, g1 = self.g_nodes[k], self.g_mid[k], self.g_nodes[k + 1]
                k1y, k1v = v, self._load(y, g0, valid)
                k2y, k2v = v + 0.5 * H * k1v, self._load(y + 0.5 * H * k1y, gm, valid)
                k3y, k3v = v + 0.5 * H * k2v, self._load(y + 0.5 * H * k2y, gm, valid)
                k4y, k4v = v + H * k3v, self._load(y + H * k3y, g1, valid)
                y = y + H / 6.0 * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
                v = v + H / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
                if keep_profile:
                    profile[k + 1] = y
        valid &= np.isfinite(y)
        return y, valid, profile


def shoot(
    p: Problem,
    slope_range: Tuple[float, float],
    steps: int = DEFAULT_SLOPE_STEPS,
    refine: int = DEFAULT_REFINE,
    tol: float = SHOOT_TOL,
    require: bool = False,
) -> List[ShootingResult]:
    """Find slopes s with u(1; s) = 0 for u'' = -g f(u), u(0) = 0, u'(0) = s.

    Args:
        p: Problem data; g is evaluated off-grid through its profile.
        slope_range: Scan interval (lo, hi); the slope 0 is excluded.
        steps: Number of scan intervals.
        refine: Integration cells per solver cell.
        tol: Required boundary miss |u(1)|.
        require: Raise NoRootInRange instead of returning an empty list.

    Returns:
        One result per bracketed root, ordered by slope, downsampled to p.grid.

    Raises:
        ValueError: If lo >= hi or steps < 2.
        NoRootInRange: If require is set and nothing was found.
    """
    lo, hi = slope_range
    if not lo < hi:
        raise ValueError(f"slope range needs lo < hi, got ({lo}, {hi})")
    if steps < 2:
        raise ValueError(f"slope scan needs steps >= 2, got {steps}")
    integrator = _Integrator(p, refine)
    slopes = np.linspace(lo, hi, steps + 1)
    slopes = slopes[slopes != 0.0]
    ends, valid, _ = integrator.run(slopes)

    exact = valid & (np.abs(ends) <= tol)
    left, right = slopes[:-1], slopes[1:]
    brackets = (
        valid[:-1] & valid[1:]
        & (np.sign(ends[:-1]) * np.sign(ends[1:]) < 0)
        & ~exact[:-1] & ~exact[1:]
    )
    roots = list(slopes[exact])
    if np.any(brackets):
        roots.extend(_bisect(integrator, left[brackets], right[brackets], ends[:-1][brackets], tol))

    if not roots:
        message = f"no sign change of u(1; s) for s in [{lo:g}, {hi:g}] ({steps} steps)"
        if require:
            raise NoRootInRange(message)
        logger.info(message)
        return []

    roots = np.sort(np.asarray(roots))
    ends, valid, profile = integrator.run(roots, keep_profile=True)
    results = []
    for index, slope in enumerate(roots):
        values = profile[:: integrator.refine, index].copy()
        miss = abs(float(values[-1]))
        values[-1] = 0.0
        results.append(ShootingResult(float(slope), GridFunction(p.grid, values), miss, bool(valid[index])))
    logger.debug("shooting found %d roots in [%g, %g]", len(results), lo, hi)
    return results


def _bisect(
    integrator: _Integrator, lo: np.ndarray, hi: np.ndarray, end_lo: np.ndarray, tol: float
) -> List[float]:
    lo, hi, end_lo = lo.copy(), hi.copy(), end_lo.copy()
    for _ in range(MAX_HALVINGS):
        mid = 0.5 * (lo + hi)
        end_mid, _, _ = integrator.run(mid)
        if np.all(np.abs(end_mid) <= tol) or np.all(hi - lo <= np.spacing(np.abs(mid))):
            break
        same = np.sign(end_mid) == np.sign(end_lo)
        lo = np.where(same, mid, lo)
        end_lo = np.where(same, end_mid, end_lo)
        hi = np.where(same, hi, mid)
    accepted = np.abs(end_mid) <= tol
    if not np.all(accepted):
        logger.warning("%d bracketed roots missed the boundary tolerance %.1e", int(np.sum(~accepted)), tol)
    return list(mid[accepted])


def compare(u_a: GridFunction, u_b: GridFunction) -> float:
    """Sup-norm of u_a - u_b."""
    return sup_norm(u_a - u_b)


def select_positive(
    results: Sequence[ShootingResult], annulus: Optional[AnnulusSpec] = None
) -> List[ShootingResult]:
    """Valid, positive shooting solutions, optionally with norm in [r, R]."""
    selected = [result for result in results if result.valid and result.positive]
    if annulus is not None:
        selected = [result for result in selected if annulus.contains(result.norm)]
    for result in selected:
        defect = symmetry_defect(result.u)
        if defect > SHOOTING_SYMMETRY_TOL:
            logger.warning("positive shooting solution at slope %.6g has symmetry defect %.3g", result.slope, defect)
    return selected


@dataclass
class Certificate:
    """A posteriori evidence that u is a localized critical point."""

    norm: float
    grad_norm: float
    residual: float
    residual_bound: float
    cone: ConeReport
    on_manifold: bool
    localized: bool
    shooting_slope: Optional[float] = None
    discrete_slope: Optional[float] = None
    shooting_sup_diff: Optional[float] = None
    shooting_agrees: Optional[bool] = None
    notes: List[str] = field(default_factory=list)

    @property
    def residual_ok(self) -> bool:
        return self.residual <= self.residual_bound

    @property
    def passes(self) -> bool:
        return self.residual_ok and self.cone.passes and self.on_manifold and self.localized

    def to_dict(self) -> Dict[str, Any]:
        return {
            "norm": self.norm,
            "grad_norm": self.grad_norm,
            "residual": self.residual,
            "residual_bound": self.residual_bound,
            "residual_ok": self.residual_ok,
            "cone": self.cone.to_dict(),
            "on_manifold": self.on_manifold,
            "localized": self.localized,
            "shooting_slope": self.shooting_slope,
            "discrete_slope": self.discrete_slope,
            "shooting_sup_diff": self.shooting_sup_diff,
            "shooting_agrees": self.shooting_agrees,
            "passes": self.passes,
            "notes": list(self.notes),
        }


def certify(
    p: Problem,
    u: GridFunction,
    annulus: AnnulusSpec,
    slope_steps: int = DEFAULT_SLOPE_STEPS,
    slope_max: Optional[float] = None,
    refine: int = DEFAULT_REFINE,
    shooting: bool = True,
) -> Certificate:
    """Residual, cone, manifold and localization certificates plus the shooting cross-check.

    Shooting agreement stays None when the oracle finds no positive
    solution with norm in the annulus.
    """
    norm = h01_norm(u)
    certificate = Certificate(
        norm=norm,
        grad_norm=gradient_norm(p, u),
        residual=residual(p, u),
        residual_bound=residual_bound(p, u),
        cone=cone_membership(u),
        on_manifold=on_manifold(p, u, annulus),
        localized=annulus.contains(norm, strict=True),
    )
    if not certificate.cone.passes:
        certificate.notes.append(f"cone defect {certificate.cone.max_defect:.3g}")
    if not certificate.localized:
        certificate.notes.append(f"norm {norm:.6g} outside ({annulus.r:g}, {annulus.R:g})")
    if not certificate.residual_ok:
        certificate.notes.append(
            f"residual {certificate.residual:.3g} exceeds {certificate.residual_bound:.3g}"
        )
    if not shooting:
        return certificate

    upper = slope_max if slope_max is not None else SLOPE_RANGE_FACTOR * annulus.R
    candidates = select_positive(shoot(p, (0.0, upper), slope_steps, refine), annulus)
    if not candidates:
        certificate.notes.append("shooting found no positive solution in the annulus")
        return certificate
    discrete_slope = float(u.values[1] / u.grid.h)
    match = min(candidates, key=lambda result: abs(result.slope - discrete_slope))
    sup_diff = compare(u, match.u)
    slope_gap = abs(match.slope - discrete_slope) / max(abs(match.slope), np.finfo(float).tiny)
    certificate.shooting_slope = match.slope
    certificate.discrete_slope = discrete_slope
    certificate.shooting_sup_diff = sup_diff
    certificate.shooting_agrees = bool(
        sup_diff <= AGREEMENT_TOL * max(sup_norm(u), np.finfo(float).tiny) and slope_gap <= AGREEMENT_TOL
    )
    return certificate


class CertificateValidator:
    """Certifies candidate solutions and keeps a history keyed by label."""

    def __init__(self, p: Problem, slope_steps: int = DEFAULT_SLOPE_STEPS,
                 slope_max: Optional[float] = None, refine: int = DEFAULT_REFINE):
        self.problem = p
        self.slope_steps = slope_steps
        self.slope_max = slope_max
        self.refine = refine
        self.validation_history: Dict[str, Certificate] = {}

    def validate(self, label: str, u: GridFunction, annulus: AnnulusSpec) -> Certificate:
        certificate = certify(
            self.problem, u, annulus, self.slope_steps, self.slope_max, self.refine
        )
        self.validation_history[label] = certificate
        return certificate

    def get_validation_stats(self) -> Dict[str, Any]:
        total = len(self.validation_history)
        passed = sum(1 for certificate in self.validation_history.values() if certificate.passes)
        agreeing = sum(
            1 for certificate in self.validation_history.values() if certificate.shooting_agrees
        )
        return {
            "total_validations": total,
            "passed": passed,
            "failed": total - passed,
            "shooting_agreements": agreeing,
            "pass_rate": passed / total if total else 0,
        }

    def get_validation_errors(self) -> List[Dict[str, Any]]:
        return [
            {"label": label, "notes": list(certificate.notes)}
            for label, certificate in self.validation_history.items()
            if not certificate.passes
        ]
