import csv
import json
import math
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from discretization.function_space import Grid, GridFunction, GridMismatchError
from execution.solver import TRACE_COLUMNS, DescentTrace
from variational.hypotheses import HypothesisReport


NODE_TOL = 1e-12
FLOAT_FORMAT = "%.16e"
SWEEP_COLUMNS = (
    "A_tilde", "B_tilde", "C_tilde", "h1_left_margin", "h1_right_margin",
    "which_of_H234", "passes", "norm", "energy",
)


def _format_cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "" if math.isnan(value) else FLOAT_FORMAT % float(value)
    return str(value)


def to_jsonable(value: Any) -> Any:
    """Plain JSON types; non-finite floats become null."""
    if isinstance(value, Mapping):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def output_names(index: int, count: int, always_suffix: bool = False) -> Tuple[str, str]:
    """solution/trace file names; suffixed _1, _2, ... when several annuli are written."""
    if count == 1 and not always_suffix:
        return "solution.csv", "trace.csv"
    return f"solution_{index + 1}.csv", f"trace_{index + 1}.csv"


class ReportWriter:
    """Writes CSV tables, report.json and the human-readable summaries."""

    def __init__(self, output_dir: Optional[str] = None):
        """Initialize the report writer.

        Args:
            output_dir: Directory for written files; nothing is written when None.
        """
        self.output_dir = Path(output_dir) if output_dir else None
        if self.output_dir:
            self.output_dir.mkdir(parents=True, exist_ok=True)
        self.written: List[str] = []

    def _path(self, name: str) -> Path:
        if self.output_dir is None:
            raise ValueError("no output directory configured")
        return self.output_dir / name

    def _write_rows(self, path: Path, header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([_format_cell(value) for value in row])
        self.written.append(str(path))
        return str(path)

    def write_solution(self, name: str, u: GridFunction) -> str:
        rows = list(zip(u.grid.nodes, u.values))
        return self._write_rows(self._path(name), ("t", "u"), rows)

    def write_trace(self, name: str, trace: DescentTrace) -> str:
        return self._write_rows(self._path(name), TRACE_COLUMNS, trace.rows())

    def write_sweep(self, path: str, axis_names: Sequence[str], rows: Sequence[Mapping[str, Any]]) -> str:
        header = list(axis_names) + list(SWEEP_COLUMNS)
        target = Path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        return self._write_rows(target, header, [[row.get(column) for column in header] for row in rows])

    def write_report(self, report: Dict[str, Any], name: str = "report.json") -> Optional[str]:
        if self.output_dir is None:
            return None
        path = self._path(name)
        document = {"timestamp": datetime.now().isoformat(), **report}
        with open(path, "w") as f:
            json.dump(to_jsonable(document), f, indent=2)
        self.written.append(str(path))
        return str(path)

    @staticmethod
    def read_solution(path: str, grid: Grid) -> GridFunction:
        """Read a `t,u` CSV written by write_solution.

        Raises:
            GridMismatchError: If the file does not match the grid nodes.
        """
        try:
            table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        except (OSError, ValueError) as e:
            raise GridMismatchError(f"{path}: cannot read a t,u table ({e})") from e
        if table.shape[1] != 2:
            raise GridMismatchError(f"{path}: expected 2 columns, found {table.shape[1]}")
        if table.shape[0] != grid.n + 1:
            raise GridMismatchError(f"{path}: expected {grid.n + 1} rows, found {table.shape[0]}")
        offset = float(np.max(np.abs(table[:, 0] - grid.nodes)))
        if offset > NODE_TOL:
            raise GridMismatchError(f"{path}: node coordinates differ from the grid by {offset:.3g}")
        return GridFunction(grid, table[:, 1])

    @staticmethod
    def render_hypotheses(index: int, report: HypothesisReport) -> str:
        a = report.annulus
        lines = [
            f"annulus {index}: r={a.r:g} R={a.R:g} beta={a.beta:g}",
            f"  A~={report.A_tilde:.10g}  B~={report.B_tilde:.10g}  C~={report.C_tilde:.10g}",
        ]
        for name, result in report.conditions.items():
            margins = ", ".join(
                f"{key}={'n/a' if value is None else format(value, '.6g')}"
                for key, value in result.margins.items()
            )
            status = "pass" if result.passed else "fail"
            lines.append(f"  {name}: {status}  [{margins}]" + (f"  ({result.reason})" if result.reason else ""))
        lines.append(f"  certifying condition: {report.which_of_H234}")
        evidence = {
            "sampled-(h1)": report.sampled_h1,
            "sampled-(h4)": report.sampled_h4,
            "fiber shape": report.sampled_fiber_shape,
        }
        lines.append("  " + "  ".join(f"{key}: {'n/a' if value is None else value}" for key, value in evidence.items()))
        if report.C1_estimate is not None:
            lines.append(
                f"  C1~{report.C1_estimate:.6g}  C2~{report.C2_estimate:.6g}  min E on N~{report.energy_min:.10g}"
            )
        if report.example_conditions is not None:
            example = report.example_conditions
            lines.append(
                f"  power-law example: left(a<pi/r^p)={example['printed_left']} "
                f"left(a<pi/r^(p-1))={example['primitive_left']} right={example['right']}"
                + ("  [left forms disagree]" if example["forms_disagree"] else "")
            )
        lines.append(f"  verdict: {'PASS' if report.certified else 'FAIL'}")
        return "\n".join(lines)

    @staticmethod
    def render_certificate(certificate: Mapping[str, Any]) -> str:
        cone = certificate["cone"]
        lines = [
            f"norm={certificate['norm']:.10g} localized={certificate['localized']} on_manifold={certificate['on_manifold']}",
            f"residual={certificate['residual']:.3e} (bound {certificate['residual_bound']:.3e}) grad_norm={certificate.get('grad_norm', math.nan):.3e}",
            "cone defects: symmetry={:.3e} monotonicity={:.3e} harnack={:.3e}".format(
                cone["symmetry_defect"], cone["monotonicity_defect"], cone["harnack_defect"]
            ),
        ]
        if certificate.get("shooting_slope") is not None:
            lines.append(
                f"shooting: slope={certificate['shooting_slope']:.10g} discrete slope={certificate['discrete_slope']:.10g} "
                f"sup diff={certificate['shooting_sup_diff']:.3e} agrees={certificate['shooting_agrees']}"
            )
        for note in certificate.get("notes", []):
            lines.append(f"note: {note}")
        return "\n".join(lines)
