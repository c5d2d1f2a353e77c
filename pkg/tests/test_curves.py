import numpy as np
import pytest

from shapecast.curves import (
    BSplineBasis,
    Curve,
    Grid,
    bspline_expand,
    differentiate,
    inner_product,
    integrate_cumulative,
    l2_distance,
    smooth_to_curve,
)
from shapecast.exceptions import GridMismatchError, SmoothingFitError

FINE = Grid.uniform(1001)


def curve(fn, grid=FINE):
    return Curve.from_function(fn, grid)


class TestGrid:
    def test_uniform_construction(self):
        g = Grid.uniform(101)
        assert g.n_points == 101
        assert g.spacing == pytest.approx(0.01)

    def test_rejects_too_few_points(self):
        with pytest.raises(ValueError):
            Grid(np.array([0.0, 1.0]))

    def test_rejects_nonuniform(self):
        with pytest.raises(ValueError):
            Grid(np.array([0.0, 0.2, 0.5, 1.0]))

    def test_quad_weights_sum_to_one(self):
        assert Grid.uniform(51).quad_weights().sum() == pytest.approx(1.0)


class TestInnerProduct:
    def test_constant_one(self):
        f = curve(lambda t: np.ones_like(t), Grid.uniform(17))
        assert inner_product(f, f) == pytest.approx(1.0)

    def test_t_squared_integral(self):
        f = curve(lambda t: t)
        assert inner_product(f, f) == pytest.approx(1.0 / 3.0, abs=1e-6)

    def test_sin_cos_orthogonal(self):
        f = curve(lambda t: np.sin(2 * np.pi * t))
        g = curve(lambda t: np.cos(2 * np.pi * t))
        assert inner_product(f, g) == pytest.approx(0.0, abs=1e-6)

    def test_grid_mismatch_raises(self):
        f = curve(lambda t: t, Grid.uniform(11))
        g = curve(lambda t: t, Grid.uniform(21))
        with pytest.raises(GridMismatchError):
            inner_product(f, g)

    def test_symmetric_and_bilinear(self):
        rng = np.random.default_rng(0)
        grid = Grid.uniform(101)
        for _ in range(20):
            a, b, c = (Curve(grid, rng.normal(size=101)) for _ in range(3))
            x, y = rng.normal(size=2)
            assert inner_product(a, b) == pytest.approx(inner_product(b, a), abs=1e-12)
            combo = Curve(grid, x * a.values + y * b.values)
            assert inner_product(combo, c) == pytest.approx(
                x * inner_product(a, c) + y * inner_product(b, c), abs=1e-12
            )


class TestL2Distance:
    def test_identical(self):
        f = curve(lambda t: np.sin(t))
        assert l2_distance(f, f) == 0.0

    def test_constant_difference(self):
        g = Grid.uniform(11)
        one = curve(lambda t: np.ones_like(t), g)
        zero = curve(lambda t: np.zeros_like(t), g)
        assert l2_distance(one, zero) == pytest.approx(1.0)

    def test_linear_vs_zero(self):
        f = curve(lambda t: t)
        zero = curve(lambda t: np.zeros_like(t))
        assert l2_distance(f, zero) == pytest.approx(1.0 / np.sqrt(3.0), abs=1e-6)

    def test_triangle_inequality(self):
        rng = np.random.default_rng(1)
        grid = Grid.uniform(101)
        for _ in range(50):
            a, b, c = (Curve(grid, rng.normal(size=101)) for _ in range(3))
            assert l2_distance(a, c) <= l2_distance(a, b) + l2_distance(b, c) + 1e-10


class TestDifferentiate:
    def test_linear(self):
        d = differentiate(curve(lambda t: t))
        assert np.max(np.abs(d.values - 1.0)) < 1e-10

    def test_quadratic(self):
        d = differentiate(curve(lambda t: t**2))
        assert np.max(np.abs(d.values - 2.0 * FINE.points)) < 1e-4

    def test_constant(self):
        d = differentiate(curve(lambda t: np.full_like(t, 3.5)))
        assert np.max(np.abs(d.values)) < 1e-12

    def test_inverse_of_cumulative_integral(self):
        for fn in (lambda t: np.sin(2 * np.pi * t), lambda t: t**3 - t,
                   lambda t: np.exp(t)):
            f = curve(fn)
            back = differentiate(integrate_cumulative(f))
            assert np.max(np.abs(back.values - f.values)) < 1e-3


class TestBSplineExpand:
    def test_partition_of_unity(self):
        basis = BSplineBasis(n_basis=7)
        c = bspline_expand(basis, np.ones(7), Grid.uniform(101))
        assert np.max(np.abs(c.values - 1.0)) < 1e-12

    def test_single_coefficient_matches_direct_evaluation(self):
        from scipy.interpolate import BSpline

        basis = BSplineBasis(n_basis=7)
        grid = Grid.uniform(101)
        c = bspline_expand(basis, np.eye(7)[0], grid)
        direct = BSpline(basis.knots, np.eye(7)[0], basis.order - 1)(grid.points)
        assert np.max(np.abs(c.values - direct)) < 1e-12

    def test_increasing_coefficients_give_monotone_curve(self):
        basis = BSplineBasis(n_basis=7)
        coefs = np.array([0.0, 0.1, 0.35, 0.5, 0.62, 0.9, 1.0])
        c = bspline_expand(basis, coefs, Grid.uniform(1001))
        slope = differentiate(c)
        assert np.min(slope.values) >= -1e-10
        assert c.values[0] == pytest.approx(0.0, abs=1e-12)
        assert c.values[-1] == pytest.approx(1.0, abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            bspline_expand(BSplineBasis(n_basis=7), np.ones(6), Grid.uniform(11))


class TestSmoothToCurve:
    def setup_method(self):
        self.basis = BSplineBasis(n_basis=7)
        self.grid = Grid.uniform(101)
        self.x12 = np.linspace(0.0, 1.0, 12)

    def test_constant_recovered(self):
        c = smooth_to_curve(self.x12, np.full(12, 5.0), self.basis, self.grid)
        assert np.max(np.abs(c.values - 5.0)) < 1e-8

    def test_cubic_reproduced_exactly(self):
        poly = lambda t: 2.0 - 3.0 * t + 0.5 * t**2 + 4.0 * t**3
        c = smooth_to_curve(self.x12, poly(self.x12), self.basis, self.grid)
        assert np.max(np.abs(c.values - poly(self.grid.points))) < 1e-6

    def test_matches_independent_normal_equations(self):
        # direct normal-equations solve as the oracle for the lstsq path
        rng = np.random.default_rng(7)
        y = 20.0 + 3.0 * np.sin(2 * np.pi * self.x12) + rng.normal(0, 0.3, 12)
        basis = BSplineBasis(n_basis=11)
        design = basis.design_matrix(self.x12)
        coefs = np.linalg.solve(design.T @ design, design.T @ y)
        expected = basis.design_matrix(self.grid.points) @ coefs
        c = smooth_to_curve(self.x12, y, basis, self.grid)
        assert np.max(np.abs(c.values - expected)) < 1e-8
        residual_rms = np.sqrt(np.mean((design @ coefs - y) ** 2))
        assert residual_rms <= np.std(y)

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        y = rng.normal(size=12)
        first = smooth_to_curve(self.x12, y, self.basis, self.grid)
        again = smooth_to_curve(
            self.grid.points, first.values, self.basis, self.grid
        )
        assert np.max(np.abs(again.values - first.values)) < 1e-8

    def test_too_few_observations(self):
        with pytest.raises(SmoothingFitError):
            smooth_to_curve(np.linspace(0, 1, 5), np.ones(5), self.basis, self.grid)

    def test_rank_deficient_design(self):
        x = np.full(12, 0.5)  # all observations at one abscissa
        with pytest.raises(SmoothingFitError):
            smooth_to_curve(x, np.ones(12), self.basis, self.grid)
