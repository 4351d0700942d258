import copy
import json
import math
import os
from typing import Any, Dict, List, Mapping, Optional

import yaml
from jsonschema import Draft7Validator

from config.family_config import FamilyConfig
from discretization.function_space import Grid
from discretization.green_operator import NonlinearityError, WeightError
from execution.solver import SolverOptions
from variational.energy import Problem
from variational.hypotheses import HypothesisSettings
from variational.nehari import AnnulusSpec


class ConfigError(ValueError):
    """Raised for unreadable, malformed or inconsistent configuration documents."""


_NUMBER = {"type": "number"}
_POSITIVE = {"type": "number", "exclusiveMinimum": 0}


class ProblemConfig:
    """Configuration for a localization run: problem data, annuli and numerics."""

    DEFAULT_CONFIG = {
        "nonlinearity": {"family": "power", "params": {"a": 3.0, "p": 3.0}, "domain_max": None},
        "weight": {"family": "constant", "params": {"level": 1.0}},
        "annuli": [{"r": 1.0, "R": 60.0, "beta": 0.2}],
        "grid_n": 400,
        "solver": {
            "grad_tol": None,
            "max_iters": 10000,
            "armijo_c": 1e-4,
            "backtrack_factor": 0.5,
            "t_init": 1.0,
            "start": "sine",
            "constant_samples": 20,
        },
        "hypotheses": {"mode": "auto", "mu": None, "lambda": None, "search": False, "samples": 20},
        "verify": {"slope_steps": 2000, "slope_max": None, "refine": 4},
        "seed": 0,
        "max_workers": 4,
        "log_level": "INFO",
    }

    SCHEMA = {
        "type": "object",
        "required": ["nonlinearity", "weight", "annuli", "grid_n"],
        "additionalProperties": False,
        "properties": {
            "nonlinearity": {
                "type": "object",
                "required": ["family", "params"],
                "additionalProperties": False,
                "properties": {
                    "family": {"enum": FamilyConfig.get_supported_families("nonlinearity")},
                    "params": {"type": "object", "additionalProperties": _NUMBER},
                    "domain_max": {"anyOf": [_POSITIVE, {"type": "null"}]},
                },
            },
            "weight": {
                "type": "object",
                "required": ["family"],
                "additionalProperties": False,
                "properties": {
                    "family": {"enum": FamilyConfig.get_supported_families("weight")},
                    "params": {"type": "object"},
                },
            },
            "annuli": {
                "type": "array",
                "minItems": 1,
                "items": {
                    "type": "object",
                    "required": ["r", "R", "beta"],
                    "additionalProperties": False,
                    "properties": {
                        "r": _POSITIVE,
                        "R": _POSITIVE,
                        "beta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 0.25},
                    },
                },
            },
            "grid_n": {"type": "integer", "minimum": 4},
            "solver": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "grad_tol": {"anyOf": [_POSITIVE, {"type": "null"}]},
                    "max_iters": {"type": "integer", "minimum": 0},
                    "armijo_c": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                    "backtrack_factor": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                    "t_init": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                    "start": {"enum": ["sine", "random"]},
                    "constant_samples": {"type": "integer", "minimum": 0},
                },
            },
            "hypotheses": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "mode": {"enum": ["auto", "H2", "H3", "H4"]},
                    "mu": {"anyOf": [_NUMBER, {"type": "null"}]},
                    "lambda": {"anyOf": [_NUMBER, {"type": "null"}]},
                    "search": {"type": "boolean"},
                    "samples": {"type": "integer", "minimum": 0},
                },
            },
            "verify": {
                "type": "object",
                "additionalProperties": False,
                "properties": {
                    "slope_steps": {"type": "integer", "minimum": 2},
                    "slope_max": {"anyOf": [_POSITIVE, {"type": "null"}]},
                    "refine": {"type": "integer", "minimum": 1},
                },
            },
            "seed": {"type": "integer", "minimum": 0},
            "max_workers": {"type": "integer", "minimum": 1},
            "log_level": {"enum": ["DEBUG", "INFO", "WARNING", "ERROR"]},
        },
    }

    def __init__(self, config_path: Optional[str] = None, document: Optional[Mapping[str, Any]] = None):
        """Initialize the configuration.

        Args:
            config_path: Path to a JSON (or YAML) document. If None, the defaults are used.
            document: An already parsed document, merged after the file.

        Raises:
            ConfigError: If the document cannot be read, parsed or validated.
        """
        self.config = copy.deepcopy(self.DEFAULT_CONFIG)
        self.source = config_path

        if config_path:
            self._load_config(config_path)
        if document:
            self._update_config(self.config, copy.deepcopy(dict(document)))
        self.validate()

    def _load_config(self, config_path: str) -> None:
        if not os.path.exists(config_path):
            raise ConfigError(f"{config_path}: file not found")
        with open(config_path, "r") as f:
            try:
                if config_path.endswith(".json"):
                    user_config = json.load(f)
                else:
                    user_config = yaml.safe_load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(
                    f"{config_path}: parse error at line {e.lineno}, column {e.colno}: {e.msg}"
                ) from e
            except yaml.YAMLError as e:
                mark = getattr(e, "problem_mark", None)
                where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
                raise ConfigError(f"{config_path}: parse error at {where}: {getattr(e, 'problem', e)}") from e

        if user_config is None:
            return
        if not isinstance(user_config, dict):
            raise ConfigError(f"{config_path}: top level must be an object")
        self._update_config(self.config, user_config)

    def _update_config(self, base_config: Dict[str, Any], update_config: Dict[str, Any]) -> None:
        """Recursively update the base configuration with user values."""
        for key, value in update_config.items():
            if key in base_config and isinstance(base_config[key], dict) and isinstance(value, dict):
                # family parameters are replaced, never merged across families
                if key == "params":
                    base_config[key] = value
                else:
                    self._update_config(base_config[key], value)
            else:
                base_config[key] = value

    def validate(self) -> None:
        """Schema validation followed by the semantic checks.

        Raises:
            ConfigError: With the path of the first offending field.
        """
        errors = sorted(Draft7Validator(self.SCHEMA).iter_errors(self.config), key=lambda e: list(e.path))
        if errors:
            error = errors[0]
            path = "/".join(str(part) for part in error.path) or "<root>"
            raise ConfigError(f"{path}: {error.message}")

        for label, section in (("nonlinearity", self.config["nonlinearity"]), ("weight", self.config["weight"])):
            family = FamilyConfig(label, section["family"])
            problems = family.validate_params(section.get("params") or {})
            if problems:
                info = FamilyConfig.get_family_info(label, family.family)
                raise ConfigError(f"{label}/params: {'; '.join(problems)} ({family.family}: {info['description']})")

        annuli = self.config["annuli"]
        for index, annulus in enumerate(annuli):
            if not annulus["r"] < annulus["R"]:
                raise ConfigError(f"annuli/{index}: r={annulus['r']} must be < R={annulus['R']}")
        for index in range(len(annuli) - 1):
            if not annuli[index]["R"] < annuli[index + 1]["r"]:
                raise ConfigError(
                    f"annuli/{index + 1}: annuli must be ordered and disjoint "
                    f"(R={annuli[index]['R']} >= r={annuli[index + 1]['r']})"
                )
        domain_max = self.get_domain_max()
        if domain_max < annuli[-1]["R"]:
            raise ConfigError(f"nonlinearity/domain_max: {domain_max} is below the outermost R={annuli[-1]['R']}")

    def get(self, key: str, default: Any = None) -> Any:
        return self.config.get(key, default)

    def set(self, key: str, value: Any) -> None:
        self.config[key] = value
        self.validate()

    def with_overrides(self, overrides: Mapping[str, Any]) -> "ProblemConfig":
        """Copy of this configuration with slash- or dot-separated paths replaced.

        Raises:
            ConfigError: If a path does not exist or the result is invalid.
        """
        document = copy.deepcopy(self.config)
        for path, value in overrides.items():
            parts = path.replace("/", ".").split(".")
            node: Any = document
            try:
                for part in parts[:-1]:
                    node = node[int(part)] if isinstance(node, list) else node[part]
                last = parts[-1]
                if isinstance(node, list):
                    node[int(last)] = value
                elif isinstance(node, dict):
                    node[last] = value
                else:
                    raise TypeError(type(node).__name__)
            except (KeyError, IndexError, ValueError, TypeError) as e:
                raise ConfigError(f"{path}: no such configuration field") from e
        clone = ProblemConfig.__new__(ProblemConfig)
        clone.config = document
        clone.source = self.source
        clone.validate()
        return clone

    def get_domain_max(self) -> float:
        value = self.config["nonlinearity"].get("domain_max")
        return math.inf if value is None else float(value)

    def get_grid(self) -> Grid:
        return Grid(self.config["grid_n"])

    def get_annuli(self) -> List[AnnulusSpec]:
        return [AnnulusSpec(a["r"], a["R"], a["beta"]) for a in self.config["annuli"]]

    def build_problem(self) -> Problem:
        """Construct and validate f, g and the grid.

        Raises:
            ConfigError: If a family rejects its parameters or f fails validation.
        """
        nonlinearity = self.config["nonlinearity"]
        weight = self.config["weight"]
        grid = self.get_grid()
        try:
            f = FamilyConfig("nonlinearity", nonlinearity["family"]).build_nonlinearity(
                nonlinearity["params"], self.get_domain_max()
            )
            g = FamilyConfig("weight", weight["family"]).build_weight(grid, weight.get("params") or {})
            problem = Problem.build(f, g)
            problem.validate(self.config["annuli"][-1]["R"])
        except NonlinearityError as e:
            raise ConfigError(f"nonlinearity: {e}") from e
        except WeightError as e:
            raise ConfigError(f"weight: {e}") from e
        return problem

    def get_solver_options(self) -> SolverOptions:
        solver = self.config["solver"]
        return SolverOptions(
            grad_tol=solver["grad_tol"],
            max_iters=solver["max_iters"],
            armijo_c=solver["armijo_c"],
            backtrack_factor=solver["backtrack_factor"],
            t_init=solver["t_init"],
            seed=self.config["seed"],
            start=solver["start"],
            constant_samples=solver["constant_samples"],
        )

    def get_hypothesis_settings(self) -> HypothesisSettings:
        hypotheses = self.config["hypotheses"]
        return HypothesisSettings(
            mode=hypotheses["mode"],
            mu=hypotheses["mu"],
            lam=hypotheses["lambda"],
            search=hypotheses["search"],
            samples=hypotheses["samples"],
            seed=self.config["seed"],
        )

    def get_verify_config(self) -> Dict[str, Any]:
        return dict(self.config["verify"])

    def get_reporting_config(self) -> Dict[str, Any]:
        return {"log_level": self.config["log_level"], "max_workers": self.config["max_workers"]}

    def to_dict(self) -> Dict[str, Any]:
        return copy.deepcopy(self.config)
