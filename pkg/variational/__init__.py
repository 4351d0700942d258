"""Energy, Nehari projection, the cone K and the structural hypotheses."""

from variational.energy import Problem
from variational.hypotheses import HypothesisReport, HypothesisSettings, build_report, build_reports
from variational.nehari import AnnulusSpec, SignPatternViolation

__all__ = [
    "AnnulusSpec",
    "HypothesisReport",
    "HypothesisSettings",
    "Problem",
    "SignPatternViolation",
    "build_report",
    "build_reports",
]
