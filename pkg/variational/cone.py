"""The cone K of symmetric, half-monotone, Harnack-bounded functions."""

from dataclasses import asdict, dataclass
from typing import Dict, NamedTuple, Union

import numpy as np

from discretization.function_space import DomainError, GridFunction, h01_norm
from discretization.green_operator import apply_inverse_laplacian


CONE_TOL = 1e-8
PREMISE_TOL = 1e-12
HARNACK_TOL = 1e-9


@dataclass(frozen=True)
class ConeReport:
    symmetry_defect: float
    monotonicity_defect: float
    harnack_defect: float
    norm: float
    threshold: float
    passes: bool

    @property
    def max_defect(self) -> float:
        return max(self.symmetry_defect, self.monotonicity_defect, self.harnack_defect)

    def to_dict(self) -> Dict[str, Union[float, bool]]:
        return asdict(self)


class HarnackCheck(NamedTuple):
    premises_hold: bool
    conclusion_holds: bool


def phi(t: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
    """Harnack profile t(1 - 2t) on [0, 1/2]."""
    t_arr = np.asarray(t, dtype=float)
    if np.any((t_arr < 0.0) | (t_arr > 0.5)):
        raise DomainError("phi is defined on [0, 1/2]")
    value = t_arr * (1.0 - 2.0 * t_arr)
    if value.ndim == 0:
        return float(value)
    return value


def _half_nodes(u: GridFunction) -> np.ndarray:
    return u.grid.nodes[: u.grid.half_index + 1]


def symmetry_defect(u: GridFunction) -> float:
    return float(np.max(np.abs((u - u.reflected()).values)))


def monotonicity_defect(u: GridFunction) -> float:
    half = u.values[: u.grid.half_index + 1]
    if half.size < 2:
        return 0.0
    return float(max(0.0, np.max(half[:-1] - half[1:])))


def harnack_defect(u: GridFunction, norm: float) -> float:
    half = u.values[: u.grid.half_index + 1]
    floor = phi(_half_nodes(u)) * norm
    return float(max(0.0, np.max(floor - half)))


def cone_membership(u: GridFunction, tol_cone: float = CONE_TOL) -> ConeReport:
    """Measure the three cone defects of u; never raises.

    Args:
        u: Grid function to test.
        tol_cone: Tolerance relative to |u|.

    Returns:
        The defects and whether all lie within tol_cone * |u|.
    """
    norm = h01_norm(u)
    report = {
        "symmetry_defect": symmetry_defect(u),
        "monotonicity_defect": monotonicity_defect(u),
        "harnack_defect": harnack_defect(u, norm),
    }
    threshold = tol_cone * norm
    passes = all(defect <= threshold for defect in report.values())
    return ConeReport(norm=norm, threshold=threshold, passes=passes, **report)


def source_premises(w: GridFunction, tol: float = PREMISE_TOL) -> bool:
    """w >= 0, nondecreasing on [0, 1/2] and symmetric, all within tol."""
    values = w.values
    if np.min(values) < -tol:
        return False
    return monotonicity_defect(w) <= tol and symmetry_defect(w) <= tol


def harnack_lemma_check(u_source: GridFunction) -> HarnackCheck:
    """Check the Harnack inequality u >= phi |u| for u = J^{-1} w."""
    premises = source_premises(u_source)
    u = apply_inverse_laplacian(u_source)
    norm = h01_norm(u)
    conclusion = harnack_defect(u, norm) <= HARNACK_TOL * norm
    return HarnackCheck(premises, conclusion)


def harnack_floor_defect(u: GridFunction, beta: float) -> float:
    """Largest shortfall of u below phi(beta)|u| on nodes of [beta, 1/2]."""
    nodes = u.grid.nodes
    mask = (nodes >= beta) & (nodes <= 0.5)
    if not np.any(mask):
        return 0.0
    floor = phi(beta) * h01_norm(u)
    return float(max(0.0, np.max(floor - u.values[mask])))
