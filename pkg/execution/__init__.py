"""Execution package: the Nehari descent, verification oracle and resource monitor."""

from execution.monitor import ResourceMonitor
from execution.solver import AnnulusExecutor, SolverOptions, solve, solve_multi
from execution.verify_oracle import CertificateValidator, certify, shoot

__all__ = [
    "AnnulusExecutor",
    "CertificateValidator",
    "ResourceMonitor",
    "SolverOptions",
    "certify",
    "shoot",
    "solve",
    "solve_multi",
]
