"""Grid-based function representation and B-spline machinery.

Curves live on a shared uniform grid over [0, 1]; all integrals use the
trapezoid rule and all derivatives second-order finite differences, which
is accurate enough at the working resolutions (101 points for model
fitting, 1001 for transform round trips).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline

from .exceptions import GridMismatchError, SmoothingFitError

DEFAULT_GRID_POINTS = 101


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a = a.copy()
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [0, 1] with at least 3 points."""

    points: np.ndarray

    def __post_init__(self):
        pts = _freeze(self.points)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 1 or pts.size < 3:
            raise ValueError("grid needs at least 3 points")
        if abs(pts[0]) > 1e-12 or abs(pts[-1] - 1.0) > 1e-12:
            raise ValueError("grid must span [0, 1]")
        diffs = np.diff(pts)
        h = 1.0 / (pts.size - 1)
        if np.any(diffs <= 0) or np.max(np.abs(diffs - h)) > 1e-12 * max(h, 1.0):
            raise ValueError("grid spacing must be uniform")

    @property
    def n_points(self) -> int:
        return self.points.size

    @property
    def spacing(self) -> float:
        return 1.0 / (self.points.size - 1)

    @staticmethod
    def uniform(n_points: int = DEFAULT_GRID_POINTS) -> "Grid":
        return Grid(np.linspace(0.0, 1.0, n_points))

    def quad_weights(self) -> np.ndarray:
        """Trapezoid quadrature weights for this grid."""
        w = np.full(self.n_points, self.spacing)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def __eq__(self, other) -> bool:
        return isinstance(other, Grid) and self.points.size == other.points.size

    def __hash__(self) -> int:
        return hash(self.points.size)


@dataclass(frozen=True)
class Curve:
    """A real-valued function sampled on a :class:`Grid`."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = _freeze(self.values)
        object.__setattr__(self, "values", v)
        if v.ndim != 1 or v.size != self.grid.n_points:
            raise ValueError("values length must match grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("curve values must be finite")

    def __call__(self, t) -> np.ndarray:
        """Evaluate by linear interpolation at arbitrary points in [0, 1]."""
        return np.interp(t, self.grid.points, self.values)

    @staticmethod
    def from_function(fn, grid: Grid) -> "Curve":
        return Curve(grid, np.asarray(fn(grid.points), dtype=float))


def _check_same_grid(f: Curve, g: Curve) -> None:
    if f.grid != g.grid:
        raise GridMismatchError(
            f"curves live on different grids ({f.grid.n_points} vs {g.grid.n_points} points)"
        )


def inner_product(f: Curve, g: Curve) -> float:
    """L2 inner product <f, g> = int f(t) g(t) dt by the trapezoid rule."""
    _check_same_grid(f, g)
    return float(np.trapezoid(f.values * g.values, dx=f.grid.spacing))


def l2_norm(f: Curve) -> float:
    return float(np.sqrt(max(inner_product(f, f), 0.0)))


def l2_distance(f: Curve, g: Curve) -> float:
    """Norm of the difference, induced by :func:`inner_product`."""
    _check_same_grid(f, g)
    diff = f.values - g.values
    return float(np.sqrt(max(np.trapezoid(diff * diff, dx=f.grid.spacing), 0.0)))


def sup_distance(f: Curve, g: Curve) -> float:
    _check_same_grid(f, g)
    return float(np.max(np.abs(f.values - g.values)))


def differentiate(f: Curve) -> Curve:
    """First derivative: central differences inside, one-sided second order
    at the boundaries (so slope functions stay defined at the endpoints)."""
    return Curve(f.grid, np.gradient(f.values, f.grid.spacing, edge_order=2))


def integrate_cumulative(f: Curve) -> Curve:
    """Cumulative trapezoid integral, anchored at 0."""
    v = f.values
    h = f.grid.spacing
    out = np.concatenate([[0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * h)])
    return Curve(f.grid, out)


@dataclass(frozen=True)
class BSplineBasis:
    """Clamped B-spline basis on [0, 1] with equally spaced interior knots.

    ``n_basis = number of interior knots + order``; the default order 4
    gives cubic splines.
    """

    n_basis: int
    order: int = 4
    knots: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.n_basis < self.order:
            raise ValueError("n_basis must be >= order")
        if self.knots is None:
            n_interior = self.n_basis - self.order
            breaks = np.linspace(0.0, 1.0, n_interior + 2)
            knots = np.concatenate(
                [np.zeros(self.order), breaks[1:-1], np.ones(self.order)]
            )
            object.__setattr__(self, "knots", _freeze(knots))
        else:
            knots = _freeze(self.knots)
            if np.any(np.diff(knots) < 0):
                raise ValueError("knots must be nondecreasing")
            if knots.size != self.n_basis + self.order:
                raise ValueError("knot count must equal n_basis + order")
            object.__setattr__(self, "knots", knots)

    def design_matrix(self, x) -> np.ndarray:
        """Evaluate all basis functions at ``x`` (rows: points, cols: basis)."""
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return BSpline.design_matrix(x, self.knots, self.order - 1).toarray()


def bspline_expand(basis: BSplineBasis, coefs, grid: Grid) -> Curve:
    """Pointwise basis expansion sum_j coefs_j B_j evaluated on ``grid``."""
    coefs = np.asarray(coefs, dtype=float)
    if coefs.size != basis.n_basis:
        raise ValueError(
            f"expected {basis.n_basis} coefficients, got {coefs.size}"
        )
    return Curve(grid, basis.design_matrix(grid.points) @ coefs)


def smooth_to_curve(abscissa, ordinate, basis: BSplineBasis, grid: Grid) -> Curve:
    """Least squares B-spline fit of scattered samples, evaluated on ``grid``.

    Abscissae must already be rescaled to [0, 1]; at least ``n_basis``
    observations are required for a full-rank design.
    """
    x = np.asarray(abscissa, dtype=float)
    y = np.asarray(ordinate, dtype=float)
    if x.size != y.size:
        raise ValueError("abscissa and ordinate lengths differ")
    if x.size < basis.n_basis:
        raise SmoothingFitError(
            f"need at least {basis.n_basis} observations, got {x.size}"
        )
    design = basis.design_matrix(x)
    if np.linalg.matrix_rank(design) < basis.n_basis:
        raise SmoothingFitError("rank-deficient design matrix")
    coefs, *_ = np.linalg.lstsq(design, y, rcond=None)
    return bspline_expand(basis, coefs, grid)
