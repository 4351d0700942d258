#!/usr/bin/env python3

import argparse
import asyncio
import json
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, TextIO

from config.problem_config import ConfigError, ProblemConfig
from discretization.function_space import DomainError, GridMismatchError, h01_norm
from execution.monitor import ResourceMonitor
from execution.solver import AnnulusExecutor, OverlappingAnnuli, SolverError, solve
from execution.verify_oracle import CertificateValidator, Certificate
from generators.sweep_generator import SweepGenerator, SweepSpecError
from reporting.report_writer import ReportWriter, to_jsonable, output_names
from reporting.run_logger import RunLogger
from variational.hypotheses import build_report, build_reports
from variational.nehari import SignPatternViolation


EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_SOLVER_FAILURE = 3

INPUT_ERRORS = (ConfigError, SweepSpecError, GridMismatchError, OverlappingAnnuli)
DEFAULT_CONFIG_PATH = str(Path(__file__).resolve().parent / "config" / "default_config.json")


def _certified(certificate: Certificate) -> bool:
    return certificate.passes and certificate.shooting_agrees is not False


class LocalizationRunner:
    """Runs the check, solve, multi, verify and sweep commands for one configuration."""

    def __init__(
        self,
        config_path: Optional[str] = None,
        out_dir: Optional[str] = None,
        seed: Optional[int] = None,
        force: bool = False,
        json_output: bool = False,
        stream: Optional[TextIO] = None,
    ):
        """Initialize the runner.

        Args:
            config_path: Path to the configuration document.
            out_dir: Directory for CSV files, report.json and run.log.
            seed: Overrides the configured seed.
            force: Solve annuli whose hypothesis report does not certify.
            json_output: Print the machine-readable document instead of text.
            stream: Output stream for command output; stdout by default.

        Raises:
            ConfigError: If the configuration is invalid.
        """
        self.config = ProblemConfig(config_path)
        if seed is not None:
            self.config.set("seed", seed)
        self.out_dir = out_dir
        self.force = force
        self.json_output = json_output
        self.stream = stream or sys.stdout

        self.problem = self.config.build_problem()
        self.annuli = self.config.get_annuli()
        self.settings = self.config.get_hypothesis_settings()
        self.options = self.config.get_solver_options()
        verify = self.config.get_verify_config()
        self.validator = CertificateValidator(
            self.problem, verify["slope_steps"], verify["slope_max"], verify["refine"]
        )

        # run.log is attached only once the configuration has built
        self.run_logger = RunLogger(out_dir, self.config.get_reporting_config()["log_level"])
        self.monitor = ResourceMonitor()
        self.writer = ReportWriter(out_dir)

    def _emit(self, text: str, document: Dict[str, Any]) -> None:
        if self.json_output:
            print(json.dumps(to_jsonable(document), indent=2), file=self.stream)
        else:
            print(text, file=self.stream)

    def _finalize(self, command: str, entries: List[Dict[str, Any]], **extra: Any) -> Dict[str, Any]:
        document = {
            "command": command,
            "config": self.config.to_dict(),
            "annuli": entries,
            **extra,
            "resources": self.monitor.get_summary_stats(),
            "events": self.run_logger.get_event_summary(),
        }
        self.writer.write_report(document)
        self.run_logger.save_event_log()
        return document

    def check(self) -> int:
        with self.monitor.phase("check"):
            reports = build_reports(self.problem, self.annuli, self.settings)
        entries = []
        for index, report in enumerate(reports):
            entries.append({
                "index": index,
                "annulus": report.annulus.to_dict(),
                "status": "passed" if report.certified else "failed",
                "hypotheses": report.to_dict(),
            })
            if not report.certified:
                self.run_logger.log_failure("hypotheses", f"annulus {index} not certified", {"reasons": report.reasons})
        document = self._finalize("check", entries)
        self._emit("\n\n".join(self.writer.render_hypotheses(i, r) for i, r in enumerate(reports)), document)
        return EXIT_OK if all(report.certified for report in reports) else EXIT_CHECK_FAILED

    def solve(self, always_suffix: bool = False) -> int:
        """Check and solve every annulus, certify the solutions and write the files."""
        command = "multi" if always_suffix else "solve"
        executor = AnnulusExecutor(
            self.problem, self.options, self.settings,
            self.config.get_reporting_config()["max_workers"], self.force,
        )
        with self.monitor.phase("solve"):
            outcomes = asyncio.run(executor.execute_batch(self.annuli))

        entries, lines = [], []
        failed = uncertified = solved = 0
        for outcome in outcomes:
            entry = outcome.to_dict()
            entry["files"] = {}
            line = f"annulus {outcome.index} [{outcome.annulus.r:g}, {outcome.annulus.R:g}]: {outcome.status}"
            if outcome.status == "failed":
                failed += 1
                self.run_logger.log_error("solver_failure", outcome.error or "unknown", {"index": outcome.index})
            elif outcome.status == "skipped":
                self.run_logger.log_warning("annulus_skipped", f"annulus {outcome.index}: hypotheses not certified")
            else:
                solved += 1
                solution = outcome.solution
                with self.monitor.phase("verify"):
                    certificate = self.validator.validate(f"annulus_{outcome.index}", solution.u, outcome.annulus)
                certified = _certified(certificate) and solution.converged
                entry["solution"].update({"residual_bound": certificate.residual_bound, "certified": certified})
                entry["certificate"] = certificate.to_dict()
                if not certified:
                    uncertified += 1
                    self.run_logger.log_failure("certificate", f"annulus {outcome.index}", {"notes": certificate.notes})
                line += f": |u|={solution.norm:.10g} E={solution.energy:.10g} |E'|={solution.grad_norm:.3e} certified={certified}"
            if self.out_dir and outcome.solution is not None:
                solution_name, trace_name = output_names(outcome.index, len(outcomes), always_suffix)
                entry["files"]["solution"] = self.writer.write_solution(solution_name, outcome.solution.u)
                if outcome.trace is not None:
                    entry["files"]["trace"] = self.writer.write_trace(trace_name, outcome.trace)
            if outcome.error and outcome.status != "solved":
                line += f" ({outcome.error})"
            entries.append(entry)
            lines.append(line)

        document = self._finalize(command, entries, execution=executor.get_execution_stats())
        self._emit("\n".join(lines), document)
        if failed:
            return EXIT_SOLVER_FAILURE
        if uncertified or solved == 0:
            return EXIT_CHECK_FAILED
        return EXIT_OK

    def multi(self) -> int:
        return self.solve(always_suffix=True)

    def verify(self, solution_csv: str) -> int:
        """Certify a `t,u` profile against the configuration.

        Raises:
            GridMismatchError: If the file does not match the configured grid.
        """
        u = self.writer.read_solution(solution_csv, self.problem.grid)
        norm = h01_norm(u)
        index = next((i for i, a in enumerate(self.annuli) if a.contains(norm)), 0)
        with self.monitor.phase("verify"):
            certificate = self.validator.validate(solution_csv, u, self.annuli[index])
        certified = _certified(certificate)
        if not certified:
            self.run_logger.log_failure("certificate", solution_csv, {"notes": certificate.notes})
        entry = {
            "index": index,
            "annulus": self.annuli[index].to_dict(),
            "status": "certified" if certified else "failed",
            "certificate": certificate.to_dict(),
            "files": {"solution": solution_csv},
        }
        document = self._finalize("verify", [entry])
        self._emit(self.writer.render_certificate(certificate.to_dict()) + f"\ncertified: {certified}", document)
        return EXIT_OK if certified else EXIT_CHECK_FAILED

    def _evaluate_point(self, point: Dict[str, Any], config: ProblemConfig, solve_point: bool) -> Dict[str, Any]:
        problem = config.build_problem()
        annulus = config.get_annuli()[0]
        report = build_report(problem, annulus, config.get_hypothesis_settings())
        row = dict(point)
        row.update({
            "A_tilde": report.A_tilde,
            "B_tilde": report.B_tilde,
            "C_tilde": report.C_tilde,
            "h1_left_margin": report.h1_left_margin,
            "h1_right_margin": report.h1_right_margin,
            "which_of_H234": report.which_of_H234,
            "passes": report.passes,
        })
        if solve_point and report.certified:
            try:
                solution, _ = solve(problem, annulus, config.get_solver_options())
                row.update({"norm": solution.norm, "energy": solution.energy})
            except (SolverError, SignPatternViolation, DomainError) as e:
                self.run_logger.log_warning("sweep_solve_failed", f"{point}: {e}")
        return row

    async def _sweep_rows(self, jobs: Sequence[Any], solve_points: bool) -> List[Dict[str, Any]]:
        semaphore = asyncio.Semaphore(self.config.get_reporting_config()["max_workers"])

        async def run(point: Dict[str, Any], config: ProblemConfig) -> Dict[str, Any]:
            async with semaphore:
                return await asyncio.to_thread(self._evaluate_point, point, config, solve_points)

        return list(await asyncio.gather(*(run(point, config) for point, config in jobs)))

    def sweep(self, sweep_path: str, out_csv: Optional[str] = None) -> int:
        """Evaluate the hypothesis margins (and optionally solve) on a cartesian parameter grid.

        Raises:
            SweepSpecError: If the sweep document is malformed.
            ConfigError: If a sweep point produces an invalid configuration.
        """
        generator = SweepGenerator(sweep_path)
        jobs = []
        for point in generator.generate_points():
            overrides = generator.to_overrides(point)
            if generator.samples is not None:
                overrides["hypotheses.samples"] = generator.samples
            jobs.append((point, self.config.with_overrides(overrides)))

        with self.monitor.phase("sweep"):
            rows = asyncio.run(self._sweep_rows(jobs, generator.solve))

        target = out_csv or str(Path(self.out_dir or ".") / "sweep.csv")
        self.writer.write_sweep(target, generator.axis_names, rows)
        passing = sum(1 for row in rows if row["passes"])
        document = self._finalize(
            "sweep", [], sweep={"file": target, "stats": generator.get_generation_stats(), "rows": rows}
        )
        self._emit(f"{len(rows)} sweep points, {passing} pass (H1) and one of (H2)-(H4); table in {target}", document)
        return EXIT_OK

    def close(self) -> None:
        self.run_logger.close()


def parse_args(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:
    """Parse command line arguments.

    Returns:
        Parsed command line arguments.
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=DEFAULT_CONFIG_PATH, help="Path to configuration file")
    common.add_argument("--out", type=str, default=None, help="Output directory for CSV files and report.json")
    common.add_argument("--seed", type=int, default=None, help="Override the configured seed")
    common.add_argument("--force", action="store_true", help="Solve even when the hypothesis checks fail")
    common.add_argument("--json", action="store_true", help="Print the machine-readable report to stdout")

    parser = argparse.ArgumentParser(
        description="Localize positive solutions of -u'' = g(t) f(u), u(0) = u(1) = 0, in conical annuli"
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("check", parents=[common], help="Evaluate the hypotheses for every annulus")
    commands.add_parser("solve", parents=[common], help="Check, solve and certify every annulus")
    commands.add_parser("multi", parents=[common], help="Like solve, with per-annulus file suffixes")
    verify = commands.add_parser("verify", parents=[common], help="Certify a solution CSV")
    verify.add_argument("--solution", type=str, required=True, help="Path to a t,u CSV file")
    sweep = commands.add_parser("sweep", parents=[common], help="Tabulate hypothesis margins over a parameter grid")
    sweep.add_argument("--sweep", type=str, required=True, help="Path to the sweep document")
    sweep.add_argument("--out-csv", type=str, default=None, help="Path of the sweep table")
    return parser.parse_args(argv)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point.

    Returns:
        Exit code: 0 success, 1 failed check or certificate, 2 input error, 3 solver failure.
    """
    args = parse_args(argv)
    try:
        runner = LocalizationRunner(args.config, args.out, args.seed, args.force, args.json)
    except INPUT_ERRORS as e:
        print(f"Error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR

    try:
        if args.command == "check":
            return runner.check()
        if args.command == "solve":
            return runner.solve()
        if args.command == "multi":
            return runner.multi()
        if args.command == "verify":
            return runner.verify(args.solution)
        return runner.sweep(args.sweep, args.out_csv)
    except INPUT_ERRORS as e:
        runner.run_logger.log_error("input_error", str(e))
        runner.run_logger.save_event_log()
        return EXIT_INPUT_ERROR
    except Exception as e:
        runner.run_logger.log_error("unexpected_error", f"{type(e).__name__}: {e}")
        runner.run_logger.save_event_log()
        return EXIT_SOLVER_FAILURE
    finally:
        runner.close()


if __name__ == "__main__":
    sys.exit(main())
