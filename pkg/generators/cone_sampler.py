from typing import Any, Dict, List, Optional

import numpy as np

from discretization.function_space import Grid, GridFunction, h01_norm
from discretization.green_operator import apply_inverse_laplacian


SOURCE_KINDS = ("step", "piecewise_linear")


class ConeSampler:
    """Generates random test functions, Harnack premise sources and cone elements."""

    def __init__(self, grid: Grid, seed: Optional[int] = None, max_modes: int = 8):
        """Initialize the sampler.

        Args:
            grid: Grid the samples live on.
            seed: Seed for numpy's default generator.
            max_modes: Number of sine modes in random series.
        """
        self.grid = grid
        self.seed = seed
        self.max_modes = max_modes
        self.rng = np.random.default_rng(seed)
        self.generated: Dict[str, int] = {}

    def _record(self, kind: str) -> None:
        self.generated[kind] = self.generated.get(kind, 0) + 1

    def sine_series(self, scale: float = 1.0) -> GridFunction:
        """Random sum of c_k sin(k pi t), k <= max_modes, with |c_k| <= scale / k."""
        modes = np.arange(1, self.max_modes + 1)
        coefficients = self.rng.uniform(-1.0, 1.0, self.max_modes) * scale / modes
        nodes = self.grid.nodes
        values = np.sin(np.pi * np.outer(nodes, modes)) @ coefficients
        values[[0, -1]] = 0.0
        self._record("sine_series")
        return GridFunction(self.grid, values)

    def symmetric_sine_series(self, scale: float = 1.0) -> GridFunction:
        """Random series of odd modes only, hence symmetric about 1/2."""
        modes = np.arange(1, self.max_modes + 1, 2)
        coefficients = self.rng.uniform(-1.0, 1.0, modes.size) * scale / modes ** 2
        values = np.sin(np.pi * np.outer(self.grid.nodes, modes)) @ coefficients
        values[[0, -1]] = 0.0
        self._record("symmetric_sine_series")
        return GridFunction(self.grid, values)

    def _half_profile(self, kind: str, pieces: int) -> Any:
        breaks = np.sort(self.rng.uniform(0.0, 0.5, pieces))
        rises = self.rng.exponential(1.0, pieces)
        base = self.rng.uniform(0.0, 1.0)
        if kind == "step":
            return lambda s: base + (s[:, None] >= breaks[None, :]).astype(float) @ rises
        return lambda s: base + np.maximum(s[:, None] - breaks[None, :], 0.0) @ (4.0 * rises)

    def premise_source(self, kind: Optional[str] = None, pieces: int = 4) -> GridFunction:
        """Random nonnegative, symmetric source nondecreasing on [0, 1/2].

        Args:
            kind: "step" or "piecewise_linear"; random when None.
            pieces: Number of jumps or kinks of the half-profile.

        Returns:
            Nodal source w, exactly symmetric at the nodes.
        """
        if kind is None:
            kind = str(self.rng.choice(SOURCE_KINDS))
        if kind not in SOURCE_KINDS:
            raise ValueError(f"unknown source kind '{kind}'")
        profile = self._half_profile(kind, pieces)
        values = profile(self.grid.mirrored_nodes)
        if not np.any(values > 0.0):
            values = values + 1.0
        self._record(f"source_{kind}")
        return GridFunction(self.grid, values)

    def cone_element(self, norm: Optional[float] = None, sine_weight: Optional[float] = None) -> GridFunction:
        """Random element of K: J^{-1} of a premise source plus c sin(pi t), c >= 0.

        Args:
            norm: Rescale to this H_0^1 norm when given.
            sine_weight: Coefficient c relative to the source part; random when None.

        Returns:
            A cone element.
        """
        u = apply_inverse_laplacian(self.premise_source())
        if sine_weight is None:
            sine_weight = float(self.rng.uniform(0.0, 1.0))
        if sine_weight > 0.0:
            sine = self.grid.sample(lambda t: np.sin(np.pi * t))
            u = u + sine * (sine_weight * h01_norm(u) / h01_norm(sine))
        if norm is not None:
            u = u * (norm / h01_norm(u))
        self._record("cone_element")
        return u

    def generate_batch(self, count: int, kind: str = "cone_element", **kwargs: Any) -> List[GridFunction]:
        """Generate `count` samples of one kind."""
        factories = {
            "cone_element": self.cone_element,
            "premise_source": self.premise_source,
            "sine_series": self.sine_series,
            "symmetric_sine_series": self.symmetric_sine_series,
        }
        if kind not in factories:
            raise ValueError(f"unknown sample kind '{kind}'")
        return [factories[kind](**kwargs) for _ in range(count)]

    def get_generation_stats(self) -> Dict[str, Any]:
        return {"seed": self.seed, "grid_n": self.grid.n, "generated": dict(self.generated)}
