"""Certification of the structural conditions (H1)-(H4) and sampled (h1)-(h4) evidence."""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import integrate

from discretization.function_space import (
    DomainError,
    GridFunction,
    h01_norm,
    partial_quadrature,
    quadrature,
)
from discretization.green_operator import WeightFunction, apply_inverse_laplacian
from generators.cone_sampler import ConeSampler
from variational.cone import phi
from variational.energy import Problem, energy, hessian_diagonal, hessian_form
from variational.nehari import (
    AnnulusSpec,
    SignPatternViolation,
    fiber_ratio,
    project,
    sample_sign_pattern,
)


logger = logging.getLogger("nehari_localizer.hypotheses")

CONDITION_GRID_POINTS = 2000
T_FLOOR_FACTOR = 1e-6
INEQUALITY_SLACK = 1e-12
SUPPORT_TOL = 1e-12
POWER_ITERATIONS = 500
POWER_RTOL = 1e-14
SEARCH_MU = np.linspace(1.0, 10.0, 91)[1:]
MODES = ("auto", "H2", "H3", "H4")
H2_INNERMOST_ONLY = "H2 certifies only the innermost certified annulus"


class ConditionResult(NamedTuple):
    passed: bool
    margins: Dict[str, Optional[float]]
    reason: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {"passed": self.passed, "margins": dict(self.margins), "reason": self.reason}


class Constants(NamedTuple):
    A_tilde: float
    B_tilde: float
    C_tilde: float


@dataclass(frozen=True)
class HypothesisSettings:
    """How the checker picks and parameterizes (H2)/(H3)/(H4)."""

    mode: str = "auto"
    mu: Optional[float] = None
    lam: Optional[float] = None
    search: bool = False
    samples: int = 20
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"hypothesis mode must be one of {MODES}, got '{self.mode}'")
        if self.samples < 0:
            raise ValueError("hypothesis samples must be >= 0")


@dataclass(frozen=True)
class AbstractConstants:
    C1_estimate: float
    C2_estimate: float
    energy_min: float
    hessian_uu_max: float
    samples_used: int
    skipped: int

    @property
    def hessian_sign_consistent(self) -> bool:
        return self.hessian_uu_max < 0.0


@dataclass(frozen=True)
class SampledEvidence:
    passed: bool
    samples: int
    failures: int
    violations: Dict[str, int] = field(default_factory=dict)


@dataclass
class HypothesisReport:
    annulus: AnnulusSpec
    A_tilde: float
    B_tilde: float
    C_tilde: float
    h1_left_margin: Optional[float]
    h1_right_margin: Optional[float]
    which_of_H234: str
    conditions: Dict[str, ConditionResult]
    passes: bool
    reasons: List[str] = field(default_factory=list)
    C1_estimate: Optional[float] = None
    C2_estimate: Optional[float] = None
    energy_min: Optional[float] = None
    sampled_h1: Optional[bool] = None
    sampled_h4: Optional[bool] = None
    sampled_fiber_shape: Optional[bool] = None
    analytic_hessian_bound: Optional[float] = None
    analytic_bound_consistent: Optional[bool] = None
    example_conditions: Optional[Dict[str, Any]] = None

    @property
    def evidence_passes(self) -> bool:
        """Sampled evidence never contradicts the analytic verdict."""
        return all(
            flag is not False
            for flag in (self.sampled_h1, self.sampled_h4, self.sampled_fiber_shape)
        )

    @property
    def certified(self) -> bool:
        return self.passes and self.evidence_passes

    def to_dict(self) -> Dict[str, Any]:
        report = {
            key: value
            for key, value in asdict(self).items()
            if key not in ("annulus", "conditions")
        }
        report["annulus"] = self.annulus.to_dict()
        report["conditions"] = {name: result.to_dict() for name, result in self.conditions.items()}
        report["certified"] = self.certified
        return report


def compute_constants(g: WeightFunction, beta: float) -> Constants:
    """A = |g|_L2, B = integral of g over [0, beta], C = integral over [beta, 1/2]."""
    if not 0.0 < beta < 0.25:
        raise ValueError(f"beta must lie in (0, 1/4), got {beta}")
    squared = GridFunction(g.grid, g.values ** 2)
    return Constants(
        math.sqrt(quadrature(squared)),
        partial_quadrature(g.samples, 0.0, beta),
        partial_quadrature(g.samples, beta, 0.5),
    )


def _value(p: Problem, x: float) -> float:
    return float(p.f.f(x))


def _harnack_range(a: AnnulusSpec) -> np.ndarray:
    return np.linspace(a.r * phi(a.beta), a.R, CONDITION_GRID_POINTS)


def check_H1(p: Problem, a: AnnulusSpec) -> ConditionResult:
    """f(r)/r < pi/A and f(R phi(beta))/R > 1/(2 phi(beta) C)."""
    A_tilde, _, C_tilde = compute_constants(p.g, a.beta)
    if C_tilde <= 0.0:
        return ConditionResult(False, {"left": None, "right": None}, "C̃ = 0")
    if A_tilde <= 0.0:
        return ConditionResult(False, {"left": None, "right": None}, "Ã = 0")
    phi_beta = phi(a.beta)
    left = math.pi / A_tilde - _value(p, a.r) / a.r
    right = _value(p, a.R * phi_beta) / a.R - 1.0 / (2.0 * phi_beta * C_tilde)
    passed = left > 0.0 and right > 0.0
    reason = None
    if not passed:
        failing = [side for side, margin in (("left", left), ("right", right)) if margin <= 0.0]
        reason = f"(H1) {' and '.join(failing)} inequality fails"
    return ConditionResult(passed, {"left": left, "right": right}, reason)


def check_H2(p: Problem, a: AnnulusSpec) -> ConditionResult:
    """t f'(t) - f(t) > 0 on [R 1e-6, R]; theta is taken as the expression itself."""
    t = np.linspace(a.R * T_FLOOR_FACTOR, a.R, CONDITION_GRID_POINTS)
    margin = t * p.f.f1(t) - p.f.f(t)
    min_margin = float(np.min(margin))
    passed = bool(np.all(margin > 0.0))
    reason = None if passed else f"t f'(t) - f(t) is not positive (min {min_margin:.3g})"
    return ConditionResult(passed, {"min_margin": min_margin}, reason)


def check_H3(p: Problem, a: AnnulusSpec, mu: float, lam: float) -> ConditionResult:
    """Ambrosetti-Rabinowitz form with derivative floor lam on [r phi(beta), R].

    Args:
        p: Problem data.
        a: Annulus.
        mu: Superlinearity exponent, mu > 1.
        lam: Lower bound for f', lam > 0.

    Returns:
        Pass flag and the margin of each of the three inequalities.
    """
    if not mu > 1.0 or not lam > 0.0:
        return ConditionResult(
            False, {"ar_min": None, "derivative_min": None, "estimate": None},
            f"(H3) needs mu > 1 and lambda > 0, got mu={mu}, lambda={lam}",
        )
    _, B_tilde, C_tilde = compute_constants(p.g, a.beta)
    t = _harnack_range(a)
    values = p.f.f(t)
    slopes = p.f.f1(t)
    slack = INEQUALITY_SLACK * max(1.0, float(np.max(np.abs(mu * values))), float(np.max(np.abs(slopes))))
    ar_min = float(np.min(t * slopes - mu * values))
    derivative_min = float(np.min(slopes) - lam)
    inner = a.r * phi(a.beta)
    estimate = lam * C_tilde * (1.0 - 1.0 / mu) * inner - B_tilde * _value(p, inner)
    margins = {"ar_min": ar_min, "derivative_min": derivative_min, "estimate": estimate}
    failing = []
    if ar_min < -slack:
        failing.append("t f' - mu f >= 0")
    if derivative_min < -slack:
        failing.append("f' >= lambda")
    if not estimate > 0.0:
        failing.append("B f(r phi) < lambda C (1 - 1/mu) r phi")
    reason = f"(H3) fails: {', '.join(failing)}" if failing else None
    return ConditionResult(not failing, margins, reason)


def search_H3(p: Problem, a: AnnulusSpec) -> Tuple[Optional[float], float, ConditionResult]:
    """Grid search over mu in (1, 10] with lambda = min f' on [r phi(beta), R].

    The largest admissible mu maximizes the estimate margin.
    """
    lam = float(np.min(p.f.f1(_harnack_range(a))))
    best: Optional[Tuple[float, ConditionResult]] = None
    for mu in SEARCH_MU[::-1]:
        result = check_H3(p, a, float(mu), lam)
        if result.passed:
            return float(mu), lam, result
        if best is None:
            best = (float(mu), result)
    mu, result = best
    return None, lam, ConditionResult(False, result.margins, f"no mu in (1, 10] satisfies (H3); {result.reason}")


def check_H4(p: Problem, a: AnnulusSpec) -> ConditionResult:
    """g = 0 on [0, beta), f'' > 0 and t f' - f > 0 on [r phi(beta), R]."""
    nodes = p.grid.nodes
    outside = p.g.values[nodes < a.beta - SUPPORT_TOL]
    g_outside = float(np.max(outside)) if outside.size else 0.0
    t = _harnack_range(a)
    curvature_min = float(np.min(p.f.f2(t)))
    theta_min = float(np.min(t * p.f.f1(t) - p.f.f(t)))
    margins = {"g_outside_support": g_outside, "M": curvature_min, "theta_tilde_min": theta_min}
    failing = []
    if g_outside > SUPPORT_TOL:
        failing.append("g vanishes on [0, beta)")
    if not curvature_min > 0.0:
        failing.append("f'' > 0")
    if not theta_min > 0.0:
        failing.append("t f' - f > 0")
    reason = f"(H4) fails: {', '.join(failing)}" if failing else None
    return ConditionResult(not failing, margins, reason)


def analytic_hessian_bound(
    p: Problem, a: AnnulusSpec, mode: str, mu: Optional[float] = None, lam: Optional[float] = None
) -> Optional[float]:
    """A priori upper bound for E''(u)(u, u) on the Nehari set under the given condition."""
    A_tilde, B_tilde, C_tilde = compute_constants(p.g, a.beta)
    inner = a.r * phi(a.beta)
    if mode in ("H2", "H4"):
        t = _harnack_range(a)
        theta_min = float(np.min(t * p.f.f1(t) - p.f.f(t)))
        return -2.0 * C_tilde * inner * theta_min
    if mode == "H3" and mu is not None and lam is not None:
        return 2.0 * inner * (B_tilde * _value(p, inner) - lam * C_tilde * (1.0 - 1.0 / mu) * inner)
    return None


def power_law_example_conditions(a: float, p: float, r: float, R: float, beta: float) -> Dict[str, Any]:
    """Closed-form (H1) conditions for f = a t^p, g = 1.

    The left inequality is evaluated both as a < pi/r^p and in the form
    a < pi/r^(p-1) that follows from (H1) directly; disagreement is flagged.
    """
    printed_bound = math.pi / r ** p
    primitive_bound = math.pi / r ** (p - 1)
    right_bound = 1.0 / (R ** (p - 1) * beta ** (p + 1) * (1.0 - 2.0 * beta) ** (p + 2))
    printed_left = a < printed_bound
    primitive_left = a < primitive_bound
    return {
        "printed_left": printed_left,
        "primitive_left": primitive_left,
        "right": a > right_bound,
        "printed_bound": printed_bound,
        "primitive_bound": primitive_bound,
        "right_bound": right_bound,
        "forms_disagree": printed_left != primitive_left,
    }


def top_curvature_mode(
    p: Problem, u: GridFunction, start: Optional[GridFunction] = None
) -> Tuple[float, GridFunction]:
    """Largest eigenvalue of w -> J^{-1}(g f'(u) w) and its unit eigenvector.

    Power iteration with the Rayleigh quotient; `start` warm-starts the
    iteration from a previous eigenvector.
    """
    grid = u.grid
    weights = hessian_diagonal(p, u)
    iterate = start if start is not None else grid.sample(lambda t: np.sin(np.pi * t))
    if not np.any(weights > 0.0):
        return 0.0, iterate
    lam = 0.0
    for _ in range(POWER_ITERATIONS):
        image = apply_inverse_laplacian(GridFunction(grid, weights * iterate.values))
        size = h01_norm(image)
        if size == 0.0:
            break
        iterate = image / size
        rayleigh = float(integrate.trapezoid(weights * iterate.values ** 2, dx=grid.h))
        converged = abs(rayleigh - lam) <= POWER_RTOL * abs(rayleigh)
        lam = rayleigh
        if converged:
            break
    return lam, iterate


def hessian_operator_bound(p: Problem, u: GridFunction) -> float:
    """Upper bound for sup |E''(u)(w1, w2)| over unit pairs.

    E''(u) = I - N'(u) with N'(u) self-adjoint and positive semidefinite,
    so the supremum is at most max(1, |1 - lambda_max|).
    """
    lam, _ = top_curvature_mode(p, u)
    return max(1.0, abs(1.0 - lam))


def _manifold_samples(p: Problem, a: AnnulusSpec, samples: int, seed: int) -> List[GridFunction]:
    return ConeSampler(p.grid, seed).generate_batch(samples, norm=a.geometric_mean)


def estimate_abstract_constants(
    p: Problem, a: AnnulusSpec, samples: int, seed: int = 0
) -> AbstractConstants:
    """Sample C1 (h3), C2 (h4) and the energy floor (h2) on random manifold points.

    Raises:
        SignPatternViolation: If no sampled cone element can be projected.
    """
    if samples < 1:
        raise ValueError("estimate_abstract_constants needs samples >= 1")
    c1, c2 = 1.0, math.inf
    energy_min, uu_max = math.inf, -math.inf
    used = skipped = 0
    last_error: Optional[Exception] = None
    for candidate in _manifold_samples(p, a, samples, seed):
        try:
            u = project(p, candidate, a)
        except (SignPatternViolation, DomainError) as exc:
            skipped += 1
            last_error = exc
            continue
        curvature = hessian_form(p, u, u, u)
        c1 = max(c1, hessian_operator_bound(p, u))
        c2 = min(c2, abs(curvature))
        uu_max = max(uu_max, curvature)
        energy_min = min(energy_min, energy(p, u))
        used += 1
    if used == 0:
        raise last_error
    if skipped:
        logger.warning("%d of %d samples could not be projected onto the Nehari set", skipped, samples)
    return AbstractConstants(c1, c2, energy_min, uu_max, used, skipped)


def sampled_h1(p: Problem, a: AnnulusSpec, samples: int = 50, seed: int = 0) -> SampledEvidence:
    """Dense-scan the fiber sign pattern on random cone elements."""
    failures = 0
    violations: Dict[str, int] = {}
    for candidate in _manifold_samples(p, a, samples, seed):
        try:
            pattern = sample_sign_pattern(p, candidate, a)
            holds, violation = pattern.holds, pattern.violation
        except DomainError:
            holds, violation = False, "domain"
        if not holds:
            failures += 1
            violations[violation] = violations.get(violation, 0) + 1
    return SampledEvidence(failures == 0, samples, failures, violations)


def sampled_fiber_shape(
    p: Problem, a: AnnulusSpec, mode: str, samples: int = 20, seed: int = 0, points: int = 50
) -> bool:
    """Monotonicity of h (modes H2/H3) or concavity of sigma h(sigma) (H4) on [r, R].

    Also requires h(r) > 0 > h(R).
    """
    sigmas = np.linspace(a.r, a.R, points)
    for candidate in _manifold_samples(p, a, samples, seed):
        try:
            ratio = fiber_ratio(p, candidate, sigmas)
        except DomainError:
            return False
        slack = INEQUALITY_SLACK * max(1.0, float(np.max(np.abs(sigmas * ratio))))
        if not (ratio[0] > 0.0 > ratio[-1]):
            return False
        if mode == "H4":
            if np.max(np.diff(sigmas * ratio, 2)) > slack:
                return False
        elif np.max(np.diff(ratio)) > slack:
            return False
    return True


def _is_unit_power_law(p: Problem) -> bool:
    return (
        p.f.family == "power"
        and p.g.family == "constant"
        and float(p.g.params.get("level", 1.0)) == 1.0
    )


def build_report(
    p: Problem,
    a: AnnulusSpec,
    settings: Optional[HypothesisSettings] = None,
    h2_admissible: bool = True,
) -> HypothesisReport:
    """Evaluate (H1), the selected (H2)/(H3)/(H4) and the sampled evidence.

    Args:
        p: Problem data.
        a: Annulus to certify.
        settings: Mode, (H3) parameters and sampling controls.
        h2_admissible: False when an inner annulus of the same run already
            certified; (H2) then cannot certify this one.

    Returns:
        The full hypothesis report.
    """
    settings = settings or HypothesisSettings()
    constants = compute_constants(p.g, a.beta)
    h1 = check_H1(p, a)
    conditions: Dict[str, ConditionResult] = {"H1": h1}
    reasons: List[str] = [h1.reason] if h1.reason else []

    h2 = check_H2(p, a)
    if not h2_admissible and h2.passed:
        h2 = ConditionResult(False, h2.margins, H2_INNERMOST_ONLY)
    conditions["H2"] = h2

    mu, lam = settings.mu, settings.lam
    if mu is not None and lam is not None:
        conditions["H3"] = check_H3(p, a, mu, lam)
    elif settings.search:
        mu, lam, conditions["H3"] = search_H3(p, a)
        if mu is not None:
            conditions["H3"].margins.update({"mu": mu, "lambda": lam})
    else:
        conditions["H3"] = ConditionResult(False, {}, "(H3) not evaluated: no mu, lambda and no search")
    conditions["H4"] = check_H4(p, a)

    candidates = ("H2", "H3", "H4") if settings.mode == "auto" else (settings.mode,)
    which = next((name for name in candidates if conditions[name].passed), "none")
    if which == "none":
        reasons.extend(conditions[name].reason for name in candidates if conditions[name].reason)
    passes = h1.passed and which != "none"

    report = HypothesisReport(
        annulus=a,
        A_tilde=constants.A_tilde,
        B_tilde=constants.B_tilde,
        C_tilde=constants.C_tilde,
        h1_left_margin=h1.margins["left"],
        h1_right_margin=h1.margins["right"],
        which_of_H234=which,
        conditions=conditions,
        passes=passes,
        reasons=reasons,
    )
    if which != "none":
        report.analytic_hessian_bound = analytic_hessian_bound(p, a, which, mu, lam)
    if _is_unit_power_law(p):
        report.example_conditions = power_law_example_conditions(
            p.f.params["a"], p.f.params["p"], a.r, a.R, a.beta
        )
    if settings.samples > 0:
        _attach_evidence(p, a, settings, report)

    logger.info(
        "annulus [%g, %g]: H1 %s, certifying condition %s, passes=%s",
        a.r, a.R, "ok" if h1.passed else "fails", which, report.passes,
    )
    return report


def build_reports(
    p: Problem, annuli: Sequence[AnnulusSpec], settings: Optional[HypothesisSettings] = None
) -> List[HypothesisReport]:
    """Reports for ordered annuli, innermost first.

    (H2) stays admissible until some annulus certifies; annuli that fail
    their checks do not use it up.
    """
    reports: List[HypothesisReport] = []
    for a in annuli:
        h2_admissible = not any(report.certified for report in reports)
        reports.append(build_report(p, a, settings, h2_admissible))
    return reports


def _attach_evidence(p: Problem, a: AnnulusSpec, settings: HypothesisSettings, report: HypothesisReport) -> None:
    evidence = sampled_h1(p, a, settings.samples, settings.seed)
    report.sampled_h1 = evidence.passed
    if not evidence.passed:
        report.reasons.append(
            f"sampled-(h1) failed on {evidence.failures} of {evidence.samples} samples {evidence.violations}"
        )
    try:
        constants = estimate_abstract_constants(p, a, settings.samples, settings.seed)
    except (SignPatternViolation, DomainError) as exc:
        report.sampled_h4 = False
        report.reasons.append(f"sampled-(h4) unavailable: {exc}")
        return
    report.C1_estimate = constants.C1_estimate
    report.C2_estimate = constants.C2_estimate
    report.energy_min = constants.energy_min
    report.sampled_h4 = constants.C2_estimate > 0.0 and constants.hessian_sign_consistent
    if report.analytic_hessian_bound is not None:
        bound = report.analytic_hessian_bound
        report.analytic_bound_consistent = constants.hessian_uu_max <= bound + 1e-9 * max(1.0, abs(bound))
    shape_mode = report.which_of_H234 if report.which_of_H234 != "none" else settings.mode
    report.sampled_fiber_shape = sampled_fiber_shape(
        p, a, "H4" if shape_mode == "H4" else "H2", settings.samples, settings.seed
    )
