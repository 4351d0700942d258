import json
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
import pytest

from discretization.function_space import Grid, GridFunction
from discretization.green_operator import Nonlinearity, WeightFunction
from execution.solver import SolverOptions, solve
from generators.cone_sampler import ConeSampler
from variational.energy import Problem
from variational.nehari import AnnulusSpec


ACCEPTANCE = {"a": 3.0, "p": 3.0, "r": 1.0, "R": 60.0, "beta": 0.2, "n": 400}


def make_problem(f: Nonlinearity, grid: Grid, g: Optional[WeightFunction] = None) -> Problem:
    return Problem.build(f, g if g is not None else WeightFunction.constant(grid))


def sine(grid: Grid, k: int = 1) -> GridFunction:
    return grid.sample(lambda t: np.sin(k * np.pi * t))


def write_config(directory: Path, document: Dict[str, Any], name: str = "config.json") -> str:
    path = directory / name
    path.write_text(json.dumps(document))
    return str(path)


@pytest.fixture
def grid() -> Grid:
    return Grid(ACCEPTANCE["n"])


@pytest.fixture
def cubic(grid: Grid) -> Problem:
    """f = 3x^3, g = 1 on the acceptance grid."""
    return make_problem(Nonlinearity.power(ACCEPTANCE["a"], ACCEPTANCE["p"]), grid)


@pytest.fixture
def unit_cubic(grid: Grid) -> Problem:
    return make_problem(Nonlinearity.power(1.0, 3.0), grid)


@pytest.fixture
def annulus() -> AnnulusSpec:
    return AnnulusSpec(ACCEPTANCE["r"], ACCEPTANCE["R"], ACCEPTANCE["beta"])


@pytest.fixture
def sampler(grid: Grid) -> ConeSampler:
    return ConeSampler(grid, seed=7)


@pytest.fixture(scope="session")
def acceptance_problem() -> Problem:
    grid = Grid(ACCEPTANCE["n"])
    return make_problem(Nonlinearity.power(ACCEPTANCE["a"], ACCEPTANCE["p"]), grid)


@pytest.fixture(scope="session")
def acceptance_run(acceptance_problem):
    """The acceptance instance solved once per session."""
    a = AnnulusSpec(ACCEPTANCE["r"], ACCEPTANCE["R"], ACCEPTANCE["beta"])
    return solve(acceptance_problem, a, SolverOptions())
