"""Elastic registration: slope-function transforms, warping algebra,
dynamic-programming alignment, amplitude distance, and whole-sample
decomposition of curves into amplitude and phase.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _dp
from .curves import Curve, Grid, differentiate, l2_distance
from .exceptions import (
    DegenerateSrsfError,
    InvalidWarpingError,
    NonInvertibleError,
)

SLOPE_FLOOR = 1e-10  # slopes clipped here before square roots


@dataclass(frozen=True)
class WarpingFunction:
    """Boundary-preserving monotone map of [0, 1] onto itself."""

    curve: Curve

    def __post_init__(self):
        v = self.curve.values
        if abs(v[0]) > 1e-8 or abs(v[-1] - 1.0) > 1e-8:
            raise InvalidWarpingError("warping must map 0 -> 0 and 1 -> 1")
        if np.min(np.diff(v)) < -1e-10:
            raise InvalidWarpingError("warping must be nondecreasing")
        if np.min(v) < -1e-8 or np.max(v) > 1.0 + 1e-8:
            raise InvalidWarpingError("warping values must stay in [0, 1]")
        # snap to exact invariants; perturbations above are within 1e-8
        clean = np.maximum.accumulate(np.clip(v, 0.0, 1.0))
        clean[0] = 0.0
        clean[-1] = 1.0
        object.__setattr__(self, "curve", Curve(self.curve.grid, clean))

    @property
    def grid(self) -> Grid:
        return self.curve.grid

    @property
    def values(self) -> np.ndarray:
        return self.curve.values

    @staticmethod
    def identity(grid: Grid) -> "WarpingFunction":
        return WarpingFunction(Curve(grid, grid.points.copy()))

    @staticmethod
    def from_values(grid: Grid, values) -> "WarpingFunction":
        """Build a warping from nearly-valid values, rescaling endpoints."""
        v = np.asarray(values, dtype=float)
        v = np.maximum.accumulate(v)
        span = v[-1] - v[0]
        if span <= 0:
            raise InvalidWarpingError("cannot normalize a flat warping")
        v = (v - v[0]) / span
        return WarpingFunction(Curve(grid, v))


@dataclass(frozen=True)
class Srsf:
    """Square-root slope function: sqrt of the derivative for warpings,
    sign(f') * sqrt(|f'|) for general curves."""

    curve: Curve
    kind: str = "general"

    def __post_init__(self):
        if self.kind not in ("warp", "general"):
            raise ValueError("kind must be 'warp' or 'general'")
        v = self.curve.values
        if self.kind == "warp":
            if np.min(v) < -1e-9:
                raise InvalidWarpingError("warp slope function must be nonnegative")
            norm = np.sqrt(np.trapezoid(v * v, dx=self.curve.grid.spacing))
            if abs(norm - 1.0) > 1e-6:
                raise InvalidWarpingError(
                    f"warp slope function must have unit norm, got {norm:.8f}"
                )

    @property
    def values(self) -> np.ndarray:
        return self.curve.values

    @property
    def grid(self) -> Grid:
        return self.curve.grid

    def norm(self) -> float:
        v = self.curve.values
        return float(np.sqrt(np.trapezoid(v * v, dx=self.curve.grid.spacing)))


def _monotone_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Derivative that stays nonnegative for nondecreasing input: central
    differences inside, first-order one-sided at the two boundary points
    (the second-order stencil can overshoot negative on kinked warps)."""
    d = np.empty_like(values)
    d[1:-1] = (values[2:] - values[:-2]) / (2.0 * h)
    d[0] = (values[1] - values[0]) / h
    d[-1] = (values[-1] - values[-2]) / h
    return d


def srsf_of_warping(gamma: WarpingFunction) -> Srsf:
    """sqrt of the warp's derivative, renormalized to exactly unit norm."""
    v = gamma.values
    if np.min(np.diff(v)) < -1e-10:
        raise InvalidWarpingError("negative slope beyond tolerance")
    der = _monotone_derivative(v, gamma.grid.spacing)
    s = np.sqrt(np.maximum(der, SLOPE_FLOOR))
    norm = np.sqrt(np.trapezoid(s * s, dx=gamma.grid.spacing))
    if norm <= 0:
        raise DegenerateSrsfError("warp has no mass")
    return Srsf(Curve(gamma.grid, s / norm), kind="warp")


def warping_of_srsf(s: Srsf) -> WarpingFunction:
    """Inverse transform: cumulative integral of s^2, rescaled to end at 1."""
    if s.kind != "warp":
        raise ValueError("inverse transform is defined for warp-kind slope functions")
    sq = s.values * s.values
    h = s.grid.spacing
    gamma = np.concatenate([[0.0], np.cumsum(0.5 * (sq[1:] + sq[:-1]) * h)])
    total = gamma[-1]
    if total <= 0:
        raise DegenerateSrsfError("slope function integrates to zero")
    return WarpingFunction(Curve(s.grid, gamma / total))


def srsf_of_function(f: Curve) -> Srsf:
    """Slope-function transform of a general curve."""
    der = differentiate(f).values
    q = np.sign(der) * np.sqrt(np.abs(der))
    q[np.abs(der) < 1e-12] = 0.0
    return Srsf(Curve(f.grid, q), kind="general")


def compose(f: Curve, gamma: WarpingFunction) -> Curve:
    """(f o gamma)(t) = f(gamma(t)) by linear interpolation."""
    if f.grid != gamma.grid:
        raise InvalidWarpingError("curve and warping must share a grid")
    return Curve(f.grid, np.interp(gamma.values, f.grid.points, f.values))


def invert_warping(gamma: WarpingFunction) -> WarpingFunction:
    """Numerical inverse by swapping axes and re-interpolating."""
    v = gamma.values
    d = np.diff(v)
    flat = d <= 1e-14
    if np.any(flat[:-1] & flat[1:]):
        raise NonInvertibleError("flat segment wider than one grid cell")
    # nudge ties so the abscissae are strictly increasing for interp
    xp = v + np.arange(v.size) * 1e-15
    inv = np.interp(gamma.grid.points, xp, gamma.grid.points)
    return WarpingFunction.from_values(gamma.grid, inv)


def _resample(values: np.ndarray, grid: Grid, n: int) -> np.ndarray:
    if grid.n_points == n:
        return np.asarray(values, dtype=float)
    return np.interp(np.linspace(0.0, 1.0, n), grid.points, values)


def _smooth_monotone(values: np.ndarray, width: int) -> np.ndarray:
    """Boxcar with reflective ends: preserves monotonicity and endpoints
    exactly, and leaves linear sequences (identity warps) untouched."""
    if width <= 1:
        return values
    pad = width // 2
    left = 2.0 * values[0] - values[pad:0:-1]
    right = 2.0 * values[-1] - values[-2 : -2 - pad : -1]
    padded = np.concatenate([left, values, right])
    return np.convolve(padded, np.full(width, 1.0 / width), mode="valid")


def finalize_alignment_path(
    path: np.ndarray, q_target: np.ndarray, q_moving: np.ndarray,
    grid: Grid, resolution: int,
) -> tuple[WarpingFunction, float]:
    """Turn a lattice path into a warp and its attained cost.

    The piecewise-linear path carries per-step slopes from a discrete menu;
    a light boxcar (widened when the lattice is coarser than the grid)
    removes that jitter, and the cost is the L2 distance on the native grid
    between q_target and the warped q_moving.
    """
    lat = np.linspace(0.0, 1.0, resolution)
    gamma_vals = np.interp(grid.points, lat[path[:, 0]], lat[path[:, 1]])
    width = max(3, int(np.ceil(2.5 * (grid.n_points - 1) / (resolution - 1))))
    width += 1 - width % 2
    gamma = WarpingFunction.from_values(grid, _smooth_monotone(gamma_vals, width))
    resid = np.asarray(q_target, dtype=float) - warp_srsf(
        np.asarray(q_moving, dtype=float), gamma
    )
    cost = float(np.sqrt(max(np.trapezoid(resid * resid, dx=grid.spacing), 0.0)))
    return gamma, cost


def _align_srsf_values(
    q_target: np.ndarray, q_moving: np.ndarray, grid: Grid, dp_grid: int,
    refine_levels: int = 2,
) -> tuple[WarpingFunction, float]:
    """Find gamma minimizing || q_target - (q_moving o gamma) sqrt(gamma') ||."""
    if dp_grid < 8:
        raise ValueError("dp_grid must be at least 8")
    path, resolution = _dp.solve_refined(
        np.asarray(q_target, dtype=float),
        np.asarray(q_moving, dtype=float),
        dp_grid,
        refine_levels,
    )
    return finalize_alignment_path(path, q_target, q_moving, grid, resolution)


def align_pair(
    f1: Curve, f2: Curve, dp_grid: int = 101, refine_levels: int = 2
) -> tuple[WarpingFunction, float]:
    """Optimal warping of ``f2`` onto ``f1`` over the slope-bounded lattice,
    sharpened by ``refine_levels`` banded passes at doubled resolution.

    Returns (gamma, cost): ``f2 o gamma`` is elastically closest to ``f1``
    and ``cost`` is the attained L2 distance between the slope functions.
    """
    if f1.grid != f2.grid:
        raise InvalidWarpingError("curves must share a grid")
    q1 = srsf_of_function(f1)
    q2 = srsf_of_function(f2)
    return _align_srsf_values(q1.values, q2.values, f1.grid, dp_grid, refine_levels)


def fr_distance(f1: Curve, f2: Curve) -> float:
    """Extended Fisher-Rao distance: L2 distance between slope functions."""
    return l2_distance(srsf_of_function(f1).curve, srsf_of_function(f2).curve)


def amplitude_distance(
    f1: Curve, f2: Curve, dp_grid: int = 101, refine_levels: int = 2
) -> float:
    """Distance on the shape space: alignment cost minimized over warpings,
    symmetrized because the lattice search is direction-biased."""
    _, c12 = align_pair(f1, f2, dp_grid, refine_levels)
    _, c21 = align_pair(f2, f1, dp_grid, refine_levels)
    return min(c12, c21)


def warp_srsf(q: np.ndarray, gamma: WarpingFunction) -> np.ndarray:
    """Slope function of (f o gamma) given q = slope function of f."""
    grid = gamma.grid
    der = np.maximum(_monotone_derivative(gamma.values, grid.spacing), 0.0)
    qg = np.interp(gamma.values, grid.points, q)
    return qg * np.sqrt(der)


@dataclass(frozen=True)
class RegistrationResult:
    """Decomposition f_n = Y_n o gamma_n for a curve sample."""

    amplitudes: tuple
    warpings: tuple
    template_srsf: Srsf
    iterations: int
    converged: bool
    mean_warp: WarpingFunction


def mean_warping(warpings) -> WarpingFunction:
    """Mean warp via the slope-function chart: normalize the mean of the
    unit-sphere representatives and map back."""
    vals = np.stack([srsf_of_warping(g).values for g in warpings])
    grid = warpings[0].grid
    m = vals.mean(axis=0)
    norm = np.sqrt(np.trapezoid(m * m, dx=grid.spacing))
    if norm <= 0:
        raise DegenerateSrsfError("degenerate mean slope function")
    return warping_of_srsf(Srsf(Curve(grid, m / norm), kind="warp"))


def register_sample(
    curves,
    max_iter: int = 10,
    tol: float = 5e-3,
    dp_grid: int = 101,
) -> RegistrationResult:
    """Iterative template alignment of a curve sample.

    The template starts as the cross-sectional mean of slope functions;
    each sweep aligns every curve to it and the template is re-estimated
    from the aligned slope functions until its relative L2 change drops
    below ``tol`` (the lattice search jitters at the few-permille level,
    so an absolute criterion would spin). Warpings are then centered so
    their mean is the identity, keeping f_n = Y_n o gamma_n intact.
    """
    curves = list(curves)
    if len(curves) < 2:
        raise ValueError("need at least two curves to register")
    grid = curves[0].grid
    for c in curves:
        if c.grid != grid:
            raise InvalidWarpingError("all curves must share a grid")

    qs = [srsf_of_function(c).values for c in curves]
    template = np.mean(qs, axis=0)

    aligners = [WarpingFunction.identity(grid) for _ in curves]
    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        aligners = []
        warped = []
        for q in qs:
            gam, _ = _align_srsf_values(template, q, grid, dp_grid)
            aligners.append(gam)
            warped.append(warp_srsf(q, gam))
        new_template = np.mean(warped, axis=0)
        delta = np.sqrt(
            np.trapezoid((new_template - template) ** 2, dx=grid.spacing)
        )
        scale = np.sqrt(np.trapezoid(template * template, dx=grid.spacing))
        template = new_template
        if delta < tol * max(scale, 1e-12):
            converged = True
            break

    # center: mean of warpings -> identity, preserving Y_n o gamma_n = f_n.
    # Composing the aligners with the mean warp first keeps each amplitude a
    # single interpolation of its curve, which keeps reconstruction tight.
    mean_w = mean_warping([invert_warping(gam) for gam in aligners])
    centered_aligners = [
        WarpingFunction.from_values(grid, gam.curve(mean_w.values))
        for gam in aligners
    ]
    amplitudes = [compose(f, gam) for f, gam in zip(curves, centered_aligners)]
    warpings = [invert_warping(gam) for gam in centered_aligners]

    return RegistrationResult(
        amplitudes=tuple(amplitudes),
        warpings=tuple(warpings),
        template_srsf=Srsf(Curve(grid, template), kind="general"),
        iterations=iterations,
        converged=converged,
        mean_warp=mean_w,
    )


def align_to_template(
    f: Curve, result: RegistrationResult, dp_grid: int = 101
) -> tuple[Curve, WarpingFunction]:
    """Register a new curve against a fitted template, applying the same
    centering as the training sample. Returns (amplitude, warping)."""
    q = srsf_of_function(f).values
    gam, _ = _align_srsf_values(result.template_srsf.values, q, f.grid, dp_grid)
    centered = WarpingFunction.from_values(
        f.grid, gam.curve(result.mean_warp.values)
    )
    return compose(f, centered), invert_warping(centered)
