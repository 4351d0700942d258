import itertools
import json
import os
from typing import Any, Dict, List, Mapping, Optional

import numpy as np
import yaml


class SweepSpecError(ValueError):
    """Raised for unreadable or malformed sweep documents."""


AXIS_ALIASES = {
    "a": "nonlinearity.params.a",
    "p": "nonlinearity.params.p",
    "a2": "nonlinearity.params.a2",
    "p2": "nonlinearity.params.p2",
    "c": "nonlinearity.params.c",
    "level": "weight.params.level",
    "r": "annuli.0.r",
    "R": "annuli.0.R",
    "beta": "annuli.0.beta",
    "n": "grid_n",
}


class SweepGenerator:
    """Parses a sweep document and enumerates its cartesian parameter points.

    A sweep document has an ``axes`` mapping from axis name (an alias such
    as ``a`` or ``R``, or a dotted configuration path) to either
    ``{start, stop, num}`` or ``{values: [...]}``, an optional ``solve``
    flag and an optional ``samples`` count for the sampled evidence.
    """

    def __init__(self, sweep_path: Optional[str] = None, document: Optional[Mapping[str, Any]] = None):
        """Initialize the generator.

        Args:
            sweep_path: Path to a JSON or YAML sweep document.
            document: An already parsed document; used when no path is given.

        Raises:
            SweepSpecError: If the document is missing or malformed.
        """
        if sweep_path:
            document = self._load(sweep_path)
        if not isinstance(document, Mapping):
            raise SweepSpecError("sweep document must be an object with an 'axes' mapping")
        axes = document.get("axes")
        if not isinstance(axes, Mapping) or not axes:
            raise SweepSpecError("sweep document needs a non-empty 'axes' mapping")

        self.axes: Dict[str, List[float]] = {
            name: self._axis_values(name, spec) for name, spec in axes.items()
        }
        self.solve = bool(document.get("solve", False))
        self.samples = document.get("samples")
        if self.samples is not None and (not isinstance(self.samples, int) or self.samples < 0):
            raise SweepSpecError(f"samples must be a non-negative integer, got {self.samples!r}")
        self.generated = 0

    def _load(self, sweep_path: str) -> Any:
        if not os.path.exists(sweep_path):
            raise SweepSpecError(f"{sweep_path}: file not found")
        with open(sweep_path, "r") as f:
            try:
                if sweep_path.endswith(".json"):
                    return json.load(f)
                return yaml.safe_load(f)
            except (json.JSONDecodeError, yaml.YAMLError) as e:
                raise SweepSpecError(f"{sweep_path}: {e}") from e

    def _axis_values(self, name: str, spec: Any) -> List[float]:
        if not isinstance(spec, Mapping):
            raise SweepSpecError(f"axis '{name}': expected an object, got {spec!r}")
        if "values" in spec:
            values = spec["values"]
            if not isinstance(values, list) or not values:
                raise SweepSpecError(f"axis '{name}': 'values' must be a non-empty list")
            if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
                raise SweepSpecError(f"axis '{name}': values must be numbers")
            return [v for v in values]
        missing = [key for key in ("start", "stop", "num") if key not in spec]
        if missing:
            raise SweepSpecError(f"axis '{name}': missing {', '.join(missing)}")
        num = spec["num"]
        if not isinstance(num, int) or isinstance(num, bool) or num < 1:
            raise SweepSpecError(f"axis '{name}': num must be a positive integer, got {num!r}")
        start, stop = float(spec["start"]), float(spec["stop"])
        if num > 1 and not start < stop:
            raise SweepSpecError(f"axis '{name}': empty range [{start}, {stop}]")
        values = np.linspace(start, stop, num)
        if name in ("n", "grid_n"):
            return [int(round(v)) for v in values]
        return [float(v) for v in values]

    @property
    def axis_names(self) -> List[str]:
        return list(self.axes)

    @staticmethod
    def config_path(name: str) -> str:
        return AXIS_ALIASES.get(name, name)

    def generate_points(self) -> List[Dict[str, Any]]:
        """Cartesian product of all axes, first axis varying slowest."""
        names = self.axis_names
        points = [dict(zip(names, combo)) for combo in itertools.product(*self.axes.values())]
        self.generated += len(points)
        return points

    def to_overrides(self, point: Mapping[str, Any]) -> Dict[str, Any]:
        return {self.config_path(name): value for name, value in point.items()}

    def get_generation_stats(self) -> Dict[str, Any]:
        return {
            "axes": {name: len(values) for name, values in self.axes.items()},
            "points": int(np.prod([len(values) for values in self.axes.values()])),
            "generated": self.generated,
        }
