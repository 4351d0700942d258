"""Nehari descent inside one annulus and the multi-annulus driver."""

import asyncio
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from discretization.function_space import DomainError, GridFunction, h01_inner, h01_norm
from discretization.green_operator import apply_N
from execution.verify_oracle import residual
from generators.cone_sampler import ConeSampler
from variational.cone import CONE_TOL, ConeReport, cone_membership
from variational.energy import Problem, energy, gradient, hessian_form
from variational.hypotheses import (
    AbstractConstants,
    HypothesisReport,
    HypothesisSettings,
    build_report,
    build_reports,
    estimate_abstract_constants,
    top_curvature_mode,
)
from variational.nehari import (
    MANIFOLD_TOL,
    AnnulusSpec,
    SignPatternViolation,
    project,
    project_with_scale,
)


logger = logging.getLogger("nehari_localizer.solver")

STALL_STEP = 1e-14
ARMIJO_SLACK = 1e-13
MONOTONE_SLACK = 1e-12
Z_BOUND_RTOL = 1e-8
START_KINDS = ("sine", "random")

TRACE_COLUMNS = (
    "iter", "energy", "grad_norm", "step", "scale", "norm", "cone_defect", "z", "z_bound", "z_bound_iterate",
)


class SolverError(RuntimeError):
    """Descent failure; carries the best iterate and the trace when available."""

    def __init__(self, message: str, solution: Optional["Solution"] = None,
                 trace: Optional["DescentTrace"] = None):
        super().__init__(message)
        self.solution = solution
        self.trace = trace


class MaxItersExceeded(SolverError):
    pass


class LineSearchStalled(SolverError):
    pass


class ConeDefect(SolverError):
    """An intermediate point of the descent path left the cone beyond tolerance."""


class OverlappingAnnuli(ValueError):
    """Annuli are not strictly ordered and disjoint."""


@dataclass(frozen=True)
class SolverOptions:
    grad_tol: Optional[float] = None
    max_iters: int = 10000
    armijo_c: float = 1e-4
    backtrack_factor: float = 0.5
    t_init: float = 1.0
    seed: int = 0
    start: str = "sine"
    constant_samples: int = 20

    def __post_init__(self) -> None:
        if self.grad_tol is not None and not self.grad_tol > 0:
            raise ValueError(f"grad_tol must be > 0, got {self.grad_tol}")
        if self.max_iters < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")
        if not 0.0 < self.armijo_c < 1.0:
            raise ValueError(f"armijo_c must lie in (0, 1), got {self.armijo_c}")
        if not 0.0 < self.backtrack_factor < 1.0:
            raise ValueError(f"backtrack_factor must lie in (0, 1), got {self.backtrack_factor}")
        if not 0.0 < self.t_init <= 1.0:
            raise ValueError(f"t_init must lie in (0, 1], got {self.t_init}")
        if self.start not in START_KINDS:
            raise ValueError(f"start must be one of {START_KINDS}, got '{self.start}'")
        if self.constant_samples < 0:
            raise ValueError("constant_samples must be >= 0")

    def tolerance_for(self, a: AnnulusSpec) -> float:
        """grad_tol, defaulting to 1e-8 sqrt(r R)."""
        return self.grad_tol if self.grad_tol is not None else 1e-8 * a.geometric_mean


class DescentRecord(NamedTuple):
    iteration: int
    energy: float
    grad_norm: float
    step: float
    scale: float
    norm: float
    cone_defect: float
    z: float
    z_bound: float
    z_bound_iterate: float
    manifold_defect: float
    cone_passes: bool

    def row(self) -> Tuple[Any, ...]:
        return tuple(self)[: len(TRACE_COLUMNS)]


@dataclass
class DescentTrace:
    records: List[DescentRecord] = field(default_factory=list)

    def append(self, record: DescentRecord) -> None:
        self.records.append(record)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def energies(self) -> np.ndarray:
        return np.array([record.energy for record in self.records])

    def is_monotone(self, slack: float = MONOTONE_SLACK) -> bool:
        energies = self.energies
        if energies.size < 2:
            return True
        allowance = slack * np.maximum(1.0, np.abs(energies[:-1]))
        return bool(np.all(energies[1:] <= energies[:-1] + allowance))

    def satisfies_armijo(self, armijo_c: float, slack: float = MONOTONE_SLACK) -> bool:
        """E_{k+1} <= E_k - c t_k |E'(u_k)|^2 for every accepted step."""
        for previous, current in zip(self.records, self.records[1:]):
            allowance = slack * max(1.0, abs(previous.energy))
            if current.energy > previous.energy - armijo_c * current.step * previous.grad_norm ** 2 + allowance:
                return False
        return True

    def z_bound_holds(self) -> bool:
        """|z_n| <= bound from the sampled C1/C2 on every iterate that has one."""
        return all(
            abs(record.z) <= record.z_bound * (1.0 + Z_BOUND_RTOL)
            for record in self.records
            if math.isfinite(record.z) and math.isfinite(record.z_bound)
        )

    def rows(self) -> List[Tuple[Any, ...]]:
        return [record.row() for record in self.records]


@dataclass
class Solution:
    u: GridFunction
    annulus: AnnulusSpec
    norm: float
    energy: float
    grad_norm: float
    iterations: int
    cone_report: ConeReport
    localized: bool
    residual: float
    converged: bool

    def to_dict(self) -> Dict[str, Any]:
        return {
            "norm": self.norm,
            "energy": self.energy,
            "grad_norm": self.grad_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "localized": self.localized,
            "residual": self.residual,
            "cone": self.cone_report.to_dict(),
        }


def ekeland_step_with_scale(
    p: Problem, a: AnnulusSpec, u: GridFunction, t: float, image: Optional[GridFunction] = None
) -> Tuple[GridFunction, float]:
    """ekeland_step that also returns the Nehari scale s of the path point.

    `image` is N(u) when the caller already has it.
    """
    if not 0.0 < t <= 1.0:
        raise ValueError(f"step must lie in (0, 1], got {t}")
    if image is None:
        image = apply_N(u, p.f, p.g)
    path_point = u * (1.0 - t) + image * t
    report = cone_membership(path_point)
    if not report.passes:
        raise ConeDefect(f"descent path left the cone at t={t:.3g} (defect {report.max_defect:.3g})")
    projected, root = project_with_scale(p, path_point, a)
    return projected, root.s_value


def ekeland_step(p: Problem, a: AnnulusSpec, u: GridFunction, t: float) -> GridFunction:
    """Project (1 - t) u + t N(u) = u - t E'(u) back onto the Nehari set.

    Raises:
        ConeDefect: If the intermediate point fails the cone check.
        SignPatternViolation: If the fiber of the intermediate point has no root in the annulus.
    """
    projected, _ = ekeland_step_with_scale(p, a, u, t)
    return projected


def initial_iterate(p: Problem, a: AnnulusSpec, opts: SolverOptions) -> GridFunction:
    """Seed cone element at norm sqrt(r R), projected onto the Nehari set."""
    if opts.start == "random":
        seed = ConeSampler(p.grid, opts.seed).cone_element(norm=a.geometric_mean)
    else:
        sine = p.grid.sample(lambda t: np.sin(np.pi * t))
        seed = sine * (a.geometric_mean / h01_norm(sine))
    return project(p, seed, a)


class _ZBound:
    """Per-iterate bound on z_n from the sampled C1/C2.

    The iterate-augmented bound, with C1 and C2 widened by the iterate's own
    operator norm and curvature, is recorded alongside as a diagnostic.
    """

    def __init__(self, constants: Optional[AbstractConstants]):
        self.C1 = constants.C1_estimate if constants else None
        self.C2 = constants.C2_estimate if constants else None
        self.mode: Optional[GridFunction] = None

    @staticmethod
    def _bound(c1: float, c2: float, norm: float, grad_norm: float) -> float:
        return c1 / c2 * norm * grad_norm + grad_norm ** 2 / c2

    def evaluate(
        self, p: Problem, u: GridFunction, grad: GridFunction, grad_norm: float
    ) -> Tuple[float, float, float]:
        """Return z_n, the sampled-constant bound (nan without samples) and the augmented bound."""
        curvature = hessian_form(p, u, u, u)
        if curvature == 0.0:
            return math.nan, math.nan, math.inf
        z = (hessian_form(p, u, u, -grad) - grad_norm ** 2) / curvature
        norm = h01_norm(u)
        lam, self.mode = top_curvature_mode(p, u, self.mode)
        c1_iterate = max(1.0, abs(1.0 - lam))
        sampled = math.nan
        if self.C1 is not None and self.C2 is not None and self.C2 > 0.0:
            sampled = self._bound(self.C1, self.C2, norm, grad_norm)
            c1_iterate = max(c1_iterate, self.C1)
            c2_iterate = min(self.C2, abs(curvature))
        else:
            c2_iterate = abs(curvature)
        return z, sampled, self._bound(c1_iterate, c2_iterate, norm, grad_norm)


def _sampled_constants(p: Problem, a: AnnulusSpec, opts: SolverOptions) -> Optional[AbstractConstants]:
    if opts.constant_samples == 0:
        return None
    try:
        return estimate_abstract_constants(p, a, opts.constant_samples, opts.seed)
    except (SignPatternViolation, DomainError) as exc:
        logger.warning("sampled constants unavailable, z-bound not checked: %s", exc)
        return None


def _line_search(
    p: Problem, a: AnnulusSpec, u: GridFunction, grad: GridFunction,
    current: float, grad_norm: float, opts: SolverOptions,
) -> Tuple[GridFunction, float, float, float]:
    image = u - grad
    t = opts.t_init
    allowance = ARMIJO_SLACK * max(1.0, abs(current))
    while t >= STALL_STEP:
        try:
            candidate, scale = ekeland_step_with_scale(p, a, u, t, image)
        except SignPatternViolation as exc:
            logger.debug("step t=%.3g rejected: %s", t, exc)
            t *= opts.backtrack_factor
            continue
        trial = energy(p, candidate)
        if trial <= current - opts.armijo_c * t * grad_norm ** 2 + allowance:
            return candidate, trial, t, scale
        t *= opts.backtrack_factor
    raise LineSearchStalled(f"no step t >= {STALL_STEP:g} gives sufficient decrease")


def solve(
    p: Problem,
    a: AnnulusSpec,
    opts: Optional[SolverOptions] = None,
    initial: Optional[GridFunction] = None,
    constants: Optional[AbstractConstants] = None,
) -> Tuple[Solution, DescentTrace]:
    """Minimize E over the Nehari set inside the annulus by projected descent.

    Args:
        p: Problem data.
        a: Annulus.
        opts: Solver options.
        initial: Explicit starting cone element; projected before use.
        constants: Sampled C1/C2 for the z-bound; sampled here when omitted.

    Returns:
        The solution and the descent trace.

    Raises:
        MaxItersExceeded: If grad_tol is not met in max_iters steps.
        LineSearchStalled: If no admissible step remains.
        SignPatternViolation: If the starting point has no Nehari scale in the annulus.
    """
    opts = opts or SolverOptions()
    tolerance = opts.tolerance_for(a)
    if constants is None:
        constants = _sampled_constants(p, a, opts)
    z_bound = _ZBound(constants)

    if initial is not None:
        u, root = project_with_scale(p, initial, a)
        scale = root.s_value
    else:
        u, scale = initial_iterate(p, a, opts), 1.0
    current = energy(p, u)
    trace = DescentTrace()
    step = 0.0
    iteration = 0
    logger.info("solving in annulus [%g, %g], grad_tol %.3g", a.r, a.R, tolerance)

    while True:
        grad = gradient(p, u)
        grad_norm = h01_norm(grad)
        norm_sq = h01_inner(u, u)
        cone = cone_membership(u, CONE_TOL)
        z, bound, iterate_bound = z_bound.evaluate(p, u, grad, grad_norm)
        trace.append(DescentRecord(
            iteration, current, grad_norm, step, scale, math.sqrt(norm_sq), cone.max_defect,
            z, bound, iterate_bound, abs(h01_inner(grad, u)) / norm_sq, cone.passes,
        ))
        logger.debug("iter %d: E=%.12g |E'|=%.3e t=%.3g", iteration, current, grad_norm, step)
        if grad_norm <= tolerance:
            break
        if iteration >= opts.max_iters:
            solution = _finish(p, a, u, current, grad_norm, iteration, cone, converged=False)
            raise MaxItersExceeded(
                f"|E'(u)| = {grad_norm:.3e} > {tolerance:.3e} after {iteration} iterations", solution, trace
            )
        try:
            candidate, trial, step, scale = _line_search(p, a, u, grad, current, grad_norm, opts)
        except LineSearchStalled as exc:
            exc.solution = _finish(p, a, u, current, grad_norm, iteration, cone, converged=False)
            exc.trace = trace
            raise
        u, current = candidate, trial
        iteration += 1

    if trace.records[-1].manifold_defect > MANIFOLD_TOL:
        logger.warning("final iterate is off the Nehari set by %.3g", trace.records[-1].manifold_defect)
    solution = _finish(p, a, u, current, grad_norm, iteration, cone, converged=True)
    logger.info(
        "converged in %d iterations: |u|=%.10g E=%.10g |E'|=%.3e",
        iteration, solution.norm, solution.energy, solution.grad_norm,
    )
    return solution, trace


def _finish(
    p: Problem, a: AnnulusSpec, u: GridFunction, current: float, grad_norm: float,
    iteration: int, cone: ConeReport, converged: bool,
) -> Solution:
    norm = h01_norm(u)
    return Solution(
        u=u,
        annulus=a,
        norm=norm,
        energy=current,
        grad_norm=grad_norm,
        iterations=iteration,
        cone_report=cone,
        localized=a.contains(norm, strict=True),
        residual=residual(p, u),
        converged=converged,
    )


@dataclass
class AnnulusOutcome:
    index: int
    annulus: AnnulusSpec
    report: HypothesisReport
    status: str
    solution: Optional[Solution] = None
    trace: Optional[DescentTrace] = None
    error: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "index": self.index,
            "annulus": self.annulus.to_dict(),
            "status": self.status,
            "hypotheses": self.report.to_dict(),
            "solution": self.solution.to_dict() if self.solution else None,
            "error": self.error,
        }


def check_ordering(annuli: Sequence[AnnulusSpec]) -> None:
    """Raise OverlappingAnnuli unless R_i < r_{i+1} for consecutive annuli."""
    if not annuli:
        raise OverlappingAnnuli("at least one annulus is required")
    for index, (inner, outer) in enumerate(zip(annuli, annuli[1:])):
        if not inner.R < outer.r:
            raise OverlappingAnnuli(
                f"annuli {index} and {index + 1} overlap: R={inner.R:g} >= r={outer.r:g}"
            )


class AnnulusExecutor:
    """Runs the hypothesis gate and the solver for each annulus, concurrently."""

    def __init__(
        self,
        p: Problem,
        opts: Optional[SolverOptions] = None,
        settings: Optional[HypothesisSettings] = None,
        max_workers: int = 4,
        force: bool = False,
    ):
        """Initialize the executor.

        Args:
            p: Problem data shared by every annulus.
            opts: Solver options.
            settings: Hypothesis settings for the gate.
            max_workers: Bound on concurrently running annuli.
            force: Solve even when the hypothesis report does not certify.
        """
        self.problem = p
        self.opts = opts or SolverOptions()
        self.settings = settings or HypothesisSettings(seed=self.opts.seed)
        self.max_workers = max(1, max_workers)
        self.force = force
        self.execution_history: Dict[int, AnnulusOutcome] = {}

    def execute_annulus(self, index: int, a: AnnulusSpec, report: Optional[HypothesisReport] = None) -> AnnulusOutcome:
        if report is None:
            report = build_report(self.problem, a, self.settings)
        if not report.certified and not self.force:
            outcome = AnnulusOutcome(index, a, report, "skipped", error="; ".join(report.reasons) or None)
        else:
            try:
                solution, trace = solve(self.problem, a, self.opts)
                outcome = AnnulusOutcome(index, a, report, "solved", solution, trace)
            except SolverError as exc:
                outcome = AnnulusOutcome(index, a, report, "failed", exc.solution, exc.trace, str(exc))
            except (SignPatternViolation, DomainError) as exc:
                outcome = AnnulusOutcome(index, a, report, "failed", error=str(exc))
            if outcome.status == "failed":
                logger.error("annulus %d [%g, %g] failed: %s", index, a.r, a.R, outcome.error)
        self.execution_history[index] = outcome
        return outcome

    async def execute_annulus_async(
        self, semaphore: asyncio.Semaphore, index: int, a: AnnulusSpec, report: HypothesisReport
    ) -> AnnulusOutcome:
        async with semaphore:
            return await asyncio.to_thread(self.execute_annulus, index, a, report)

    async def execute_batch(self, annuli: Sequence[AnnulusSpec]) -> List[AnnulusOutcome]:
        check_ordering(annuli)
        # reports are sequential: (H2) admissibility depends on the inner annuli
        reports = await asyncio.to_thread(build_reports, self.problem, annuli, self.settings)
        semaphore = asyncio.Semaphore(self.max_workers)
        tasks = [
            self.execute_annulus_async(semaphore, index, a, report)
            for index, (a, report) in enumerate(zip(annuli, reports))
        ]
        return list(await asyncio.gather(*tasks))

    def get_execution_stats(self) -> Dict[str, Any]:
        outcomes = list(self.execution_history.values())
        counts = {status: sum(1 for o in outcomes if o.status == status) for status in ("solved", "skipped", "failed")}
        iterations = [o.solution.iterations for o in outcomes if o.status == "solved"]
        return {
            "total_annuli": len(outcomes),
            **counts,
            "average_iterations": sum(iterations) / len(iterations) if iterations else 0,
        }

    def get_failed_annuli(self) -> List[Dict[str, Any]]:
        return [
            {"index": o.index, "annulus": o.annulus.to_dict(), "error": o.error}
            for o in self.execution_history.values()
            if o.status == "failed"
        ]


async def solve_multi_async(
    p: Problem,
    annuli: Sequence[AnnulusSpec],
    opts: Optional[SolverOptions] = None,
    settings: Optional[HypothesisSettings] = None,
    max_workers: int = 4,
    force: bool = False,
) -> List[AnnulusOutcome]:
    """Check and solve every annulus; outcomes are returned in input order.

    Raises:
        OverlappingAnnuli: If the annuli are not strictly ordered and disjoint.
    """
    executor = AnnulusExecutor(p, opts, settings, max_workers, force)
    return await executor.execute_batch(annuli)


def solve_multi(
    p: Problem,
    annuli: Sequence[AnnulusSpec],
    opts: Optional[SolverOptions] = None,
    settings: Optional[HypothesisSettings] = None,
    max_workers: int = 4,
    force: bool = False,
) -> List[AnnulusOutcome]:
    return asyncio.run(solve_multi_async(p, annuli, opts, settings, max_workers, force))
