import math
from typing import Any, Dict, List, Mapping

from discretization.function_space import Grid
from discretization.green_operator import Nonlinearity, WeightFunction


class FamilyConfig:
    """Registry of nonlinearity and weight families accepted in a configuration."""

    FAMILIES = {
        "nonlinearity": {
            "power": {
                "description": "f(x) = a x^p",
                "required": ["a", "p"],
                "optional": [],
            },
            "power_sum": {
                "description": "f(x) = a x^p + a2 x^p2",
                "required": ["a", "p", "a2", "p2"],
                "optional": [],
            },
            "constant": {
                "description": "f(x) = c",
                "required": ["c"],
                "optional": [],
            },
        },
        "weight": {
            "constant": {
                "description": "g(t) = level",
                "required": [],
                "optional": ["level"],
            },
            "step": {
                "description": "g(t) = level on [beta, 1 - beta], 0 elsewhere",
                "required": ["beta"],
                "optional": ["level"],
            },
            "table": {
                "description": "piecewise-linear half-profile through (t, g) pairs on [0, 1/2]",
                "required": ["t", "g"],
                "optional": [],
            },
        },
    }

    def __init__(self, kind: str, family: str):
        """Initialize a family descriptor.

        Args:
            kind: "nonlinearity" or "weight".
            family: Family name within that kind.
        """
        if kind not in self.FAMILIES:
            raise ValueError(f"unknown family kind '{kind}'")
        if family not in self.FAMILIES[kind]:
            raise ValueError(
                f"unknown {kind} family '{family}' (expected one of {sorted(self.FAMILIES[kind])})"
            )
        self.kind = kind
        self.family = family
        self.info = self.FAMILIES[kind][family]

    def get_required_params(self) -> List[str]:
        return list(self.info["required"])

    def get_allowed_params(self) -> List[str]:
        return list(self.info["required"]) + list(self.info["optional"])

    def validate_params(self, params: Mapping[str, Any]) -> List[str]:
        """Return one message per missing or unknown parameter."""
        problems = [
            f"missing parameter '{name}'" for name in self.get_required_params() if name not in params
        ]
        allowed = set(self.get_allowed_params())
        problems.extend(f"unknown parameter '{name}'" for name in params if name not in allowed)
        return problems

    def build_nonlinearity(self, params: Mapping[str, Any], domain_max: float = math.inf) -> Nonlinearity:
        if self.kind != "nonlinearity":
            raise ValueError(f"'{self.family}' is a {self.kind} family")
        if self.family == "power":
            return Nonlinearity.power(params["a"], params["p"], domain_max)
        if self.family == "power_sum":
            return Nonlinearity.power_sum(params["a"], params["p"], params["a2"], params["p2"], domain_max)
        return Nonlinearity.constant(params["c"], domain_max)

    def build_weight(self, grid: Grid, params: Mapping[str, Any]) -> WeightFunction:
        if self.kind != "weight":
            raise ValueError(f"'{self.family}' is a {self.kind} family")
        return WeightFunction.from_family(grid, self.family, params)

    @classmethod
    def get_supported_families(cls, kind: str) -> List[str]:
        return sorted(cls.FAMILIES.get(kind, {}))

    @classmethod
    def get_family_info(cls, kind: str, family: str) -> Dict[str, Any]:
        return dict(cls.FAMILIES.get(kind, {}).get(family, {}))
