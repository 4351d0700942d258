"""Configuration package for the Nehari localizer."""

from config.family_config import FamilyConfig
from config.problem_config import ConfigError, ProblemConfig

__all__ = ["ConfigError", "FamilyConfig", "ProblemConfig"]
