import math

import numpy as np
import pytest

from discretization.function_space import (
    DomainError,
    Grid,
    GridFunction,
    h01_inner,
    l2_inner,
    sup_norm,
)
from discretization.green_operator import (
    Nonlinearity,
    NonlinearityError,
    WeightError,
    WeightFunction,
    apply_inverse_laplacian,
    apply_inverse_laplacian_kernel,
    apply_N,
    green_kernel,
)
from generators.cone_sampler import ConeSampler
from tests.conftest import sine


def half_quadratic(grid: Grid) -> GridFunction:
    return grid.sample(lambda t: t * (1.0 - t) / 2.0)


class TestGreenKernel:
    def test_values(self):
        assert green_kernel(0.5, 0.5) == pytest.approx(0.25)
        assert green_kernel(0.25, 0.75) == pytest.approx(0.0625)
        assert green_kernel(0.3, 0.6) == pytest.approx(0.12)
        assert green_kernel(0.7, 0.4) == pytest.approx(0.12)

    def test_symmetries(self):
        mesh = np.linspace(0.0, 1.0, 41)
        t, s = np.meshgrid(mesh, mesh, indexing="ij")
        kernel = green_kernel(t, s)
        assert np.allclose(kernel, green_kernel(s, t), atol=1e-15)
        assert np.allclose(kernel, green_kernel(1.0 - t, 1.0 - s), atol=1e-15)
        assert np.allclose(green_kernel(t, 1.0 - s), green_kernel(1.0 - t, s), atol=1e-15)
        assert kernel.min() >= 0.0 and kernel.max() <= 0.25

    def test_outside_unit_interval(self):
        with pytest.raises(DomainError):
            green_kernel(1.5, 0.2)


class TestInverseLaplacian:
    def test_constant_source_is_exact(self, grid):
        ones = GridFunction(grid, np.ones(grid.n + 1))
        assert sup_norm(apply_inverse_laplacian(ones) - half_quadratic(grid)) <= 1e-10

    def test_sine_eigenfunction(self, grid):
        u = apply_inverse_laplacian(sine(grid))
        assert sup_norm(u - sine(grid) / math.pi ** 2) <= 1e-4

    def test_zero(self, grid):
        assert sup_norm(apply_inverse_laplacian(grid.zeros())) == 0.0

    def test_kernel_quadrature(self, grid):
        ones = GridFunction(grid, np.ones(grid.n + 1))
        assert sup_norm(apply_inverse_laplacian_kernel(ones) - half_quadratic(grid)) <= 1e-4
        kernel_sine = apply_inverse_laplacian_kernel(sine(grid))
        assert sup_norm(kernel_sine - sine(grid) / math.pi ** 2) <= 1e-4

    def test_tridiagonal_and_kernel_paths_agree(self, grid):
        sampler = ConeSampler(grid, seed=2)
        for _ in range(10):
            w = sampler.sine_series()
            gap = sup_norm(apply_inverse_laplacian(w) - apply_inverse_laplacian_kernel(w))
            assert gap <= 5.0 * grid.h ** 2 * sup_norm(w)

    def test_discrete_weak_form(self, grid):
        sampler = ConeSampler(grid, seed=4)
        for _ in range(10):
            w, v = sampler.sine_series(), sampler.sine_series()
            lhs = h01_inner(apply_inverse_laplacian(w), v)
            rhs = l2_inner(w, v)
            assert lhs == pytest.approx(rhs, rel=5.0 * grid.h ** 2, abs=1e-12)

    def test_second_order_convergence(self):
        errors = []
        for n in (200, 400):
            grid = Grid(n)
            w = GridFunction(grid, np.exp(grid.nodes))
            exact = 1.0 - np.exp(grid.nodes) + (math.e - 1.0) * grid.nodes
            errors.append(float(np.max(np.abs(apply_inverse_laplacian(w).values - exact))))
        assert math.log2(errors[0] / errors[1]) >= 1.9


class TestNonlinearity:
    def test_power_family(self):
        f = Nonlinearity.power(3.0, 3.0)
        assert float(f.f(2.0)) == pytest.approx(24.0)
        assert float(f.f1(2.0)) == pytest.approx(36.0)
        assert float(f.f2(2.0)) == pytest.approx(36.0)
        assert float(f.F(2.0)) == pytest.approx(12.0)
        f.validate(upper=60.0)

    def test_numerical_antiderivative_matches_closed_form(self):
        closed = Nonlinearity.power_sum(1.0, 3.0, 2.0, 2.0)
        numeric = Nonlinearity(closed.eval_f, closed.eval_f1, closed.eval_f2)
        xs = np.linspace(0.0, 4.0, 9)
        assert np.allclose(numeric.F(xs), closed.F(xs), rtol=1e-9, atol=1e-10)

    def test_rejects_negative_parameters(self):
        with pytest.raises(NonlinearityError):
            Nonlinearity.power(-1.0, 3.0)
        with pytest.raises(NonlinearityError):
            Nonlinearity.constant(-0.5)

    def test_validate_catches_wrong_derivative(self):
        base = Nonlinearity.power(1.0, 3.0)
        broken = Nonlinearity(base.eval_f, lambda x: 2.0 * x ** 2, base.eval_f2)
        with pytest.raises(NonlinearityError, match="f'"):
            broken.validate(upper=2.0)

    def test_validate_catches_decreasing_f(self):
        decreasing = Nonlinearity(lambda x: 1.0 / (1.0 + x), lambda x: -1.0 / (1.0 + x) ** 2,
                                  lambda x: 2.0 / (1.0 + x) ** 3)
        with pytest.raises(NonlinearityError, match="decreasing"):
            decreasing.validate(upper=2.0)

    def test_domain_max(self):
        f = Nonlinearity.power(1.0, 3.0, domain_max=5.0)
        with pytest.raises(NonlinearityError):
            f.validate(upper=10.0)
        with pytest.raises(DomainError):
            f.check_domain(np.array([1.0, 6.0]))


class TestWeightFunction:
    def test_step_weight(self, grid):
        g = WeightFunction.step(grid, 0.2)
        assert g.values[79] == 0.0 and g.values[80] == 1.0
        assert g.values[320] == 1.0 and g.values[321] == 0.0
        assert float(g.evaluate(0.1)) == 0.0
        assert float(g.evaluate(0.9)) == 0.0
        assert float(g.evaluate(0.5)) == 1.0

    def test_table_weight(self, grid):
        g = WeightFunction.table(grid, [0.0, 0.5], [0.0, 1.0])
        assert float(g.evaluate(0.25)) == pytest.approx(0.5)
        assert float(g.evaluate(0.75)) == pytest.approx(0.5)
        assert np.array_equal(g.values, g.values[::-1])

    def test_invalid_weights(self, grid):
        with pytest.raises(WeightError, match="nondecreasing"):
            WeightFunction.table(grid, [0.0, 0.5], [1.0, 0.0])
        with pytest.raises(WeightError, match="negative"):
            WeightFunction.constant(grid, -1.0)
        with pytest.raises(WeightError):
            WeightFunction.from_family(grid, "gaussian", {})
        with pytest.raises(WeightError):
            WeightFunction.from_family(grid, "step", {})

    def test_on_grid(self, grid):
        g = WeightFunction.step(grid, 0.2).on_grid(Grid(100))
        assert g.grid.n == 100
        assert g.family == "step"
        assert g.params == {"beta": 0.2, "level": 1.0}


class TestApplyN:
    def test_zero_nonlinearity(self, grid, sampler):
        f = Nonlinearity.constant(0.0)
        u = sampler.sine_series()
        assert sup_norm(apply_N(u, f, WeightFunction.constant(grid))) == 0.0

    def test_constant_nonlinearity(self, grid, sampler):
        f = Nonlinearity.constant(1.0)
        image = apply_N(sampler.sine_series(), f, WeightFunction.constant(grid))
        assert sup_norm(image - half_quadratic(grid)) <= 1e-10

    def test_linear_nonlinearity(self, grid):
        f = Nonlinearity.power(1.0, 1.0)
        image = apply_N(sine(grid), f, WeightFunction.constant(grid))
        assert sup_norm(image - sine(grid) / math.pi ** 2) <= 1e-4
        assert image.has_zero_boundary

    def test_domain_overflow(self, grid):
        f = Nonlinearity.power(1.0, 3.0, domain_max=0.5)
        with pytest.raises(DomainError):
            apply_N(sine(grid), f, WeightFunction.constant(grid))
