import numpy as np
import pytest

from discretization.function_space import DomainError, GridFunction, h01_norm
from discretization.green_operator import apply_N
from variational.cone import (
    cone_membership,
    harnack_defect,
    harnack_floor_defect,
    harnack_lemma_check,
    monotonicity_defect,
    phi,
    source_premises,
    symmetry_defect,
)
from tests.conftest import sine


def test_phi_values():
    assert phi(0.0) == 0.0
    assert phi(0.25) == pytest.approx(0.125)
    assert phi(0.5) == 0.0
    assert np.allclose(phi(np.array([0.1, 0.2])), [0.08, 0.12])


def test_phi_outside_half_interval():
    with pytest.raises(DomainError):
        phi(0.6)
    with pytest.raises(DomainError):
        phi(np.array([-0.1, 0.2]))


class TestMembership:
    def test_sine_is_in_the_cone(self, grid):
        report = cone_membership(sine(grid), tol_cone=1e-9)
        assert report.passes
        assert report.max_defect <= report.threshold

    def test_parabola_is_in_the_cone(self, grid):
        u = grid.sample(lambda t: t * (1.0 - t))
        assert cone_membership(u, tol_cone=1e-9).passes

    def test_second_mode_is_rejected(self, grid):
        report = cone_membership(sine(grid, 2))
        assert not report.passes
        assert report.symmetry_defect > 1.0

    def test_narrow_bump_breaks_harnack(self, grid):
        u = grid.sample(lambda t: np.sin(np.pi * t) ** 20)
        report = cone_membership(u)
        assert report.symmetry_defect <= report.threshold
        assert report.monotonicity_defect == 0.0
        assert report.harnack_defect > report.threshold
        assert not report.passes
        assert harnack_floor_defect(u, 0.2) > 0.0

    def test_floor_defect_of_sine(self, grid):
        assert harnack_floor_defect(sine(grid), 0.2) == 0.0

    def test_defects_of_a_decreasing_half(self, grid):
        u = grid.sample(lambda t: np.abs(np.sin(2 * np.pi * t)))
        assert symmetry_defect(u) <= 1e-12
        assert monotonicity_defect(u) > 0.01
        assert harnack_defect(u, h01_norm(u)) == 0.0

    def test_to_dict(self, grid):
        data = cone_membership(sine(grid)).to_dict()
        assert set(data) == {
            "symmetry_defect", "monotonicity_defect", "harnack_defect", "norm", "threshold", "passes",
        }

    def test_cone_is_closed_under_positive_combinations(self, sampler):
        for _ in range(20):
            u = sampler.cone_element()
            v = sampler.cone_element()
            k = float(sampler.rng.uniform(0.1, 10.0))
            assert cone_membership(u * k).passes
            assert cone_membership(u + v).passes


class TestHarnackLemma:
    def test_constant_source(self, grid):
        check = harnack_lemma_check(GridFunction(grid, np.ones(grid.n + 1)))
        assert check.premises_hold and check.conclusion_holds

    def test_sine_source(self, grid):
        check = harnack_lemma_check(sine(grid))
        assert check.premises_hold and check.conclusion_holds

    def test_step_source(self, grid):
        w = GridFunction(grid, (grid.mirrored_nodes >= 0.2).astype(float))
        check = harnack_lemma_check(w)
        assert check.premises_hold and check.conclusion_holds

    def test_random_premise_sources(self, sampler):
        for _ in range(500):
            check = harnack_lemma_check(sampler.premise_source())
            assert check.premises_hold
            assert check.conclusion_holds

    def test_premises_rejected(self, grid):
        assert not source_premises(sine(grid, 2))
        assert not source_premises(GridFunction(grid, -np.ones(grid.n + 1)))
        assert not source_premises(grid.sample(lambda t: t, zero_boundary=False))
        assert source_premises(GridFunction(grid, np.ones(grid.n + 1)))


class TestInvariance:
    def test_nonlinear_map_preserves_the_cone(self, cubic, sampler):
        for _ in range(100):
            u = sampler.cone_element(norm=float(sampler.rng.uniform(0.5, 10.0)))
            n_u = apply_N(u, cubic.f, cubic.g)
            assert cone_membership(n_u).passes
            for t in (0.0, 0.25, 0.5, 0.75, 1.0):
                assert cone_membership(u * (1.0 - t) + n_u * t).passes
