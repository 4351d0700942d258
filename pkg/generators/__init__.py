"""Random cone elements and parameter sweeps."""

from generators.cone_sampler import ConeSampler
from generators.sweep_generator import SweepGenerator, SweepSpecError

__all__ = ["ConeSampler", "SweepGenerator", "SweepSpecError"]
