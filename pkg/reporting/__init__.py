"""Reporting package: run logging, CSV tables and report.json."""

from reporting.report_writer import ReportWriter
from reporting.run_logger import RunLogger

__all__ = ["ReportWriter", "RunLogger"]
