"""Dynamic-programming lattice solver for elastic alignment.

The search space is an n x n lattice over [0,1]^2; admissible steps are
(di, dj) pairs whose slopes dj/di lie in {1/3, 1/2, 1, 2, 3}, which bounds
recovered warp slopes to [1/3, 3]. Edge costs integrate the squared
slope-function mismatch along the linear segment with the trapezoid rule
on unit lattice steps. Both arrays are assumed resampled to the lattice.
"""

from math import gcd

import numpy as np
from numba import njit

# (di, dj) steps: all coprime pairs up to 6, bounding warp slopes to
# [1/6, 6]. The dense slope menu keeps the per-step sqrt(slope) factor
# close to the true local slope (a handful of slopes cannot), and the wide
# range leaves room to align compositions of warps, whose slopes multiply.
MOVES = tuple(
    sorted(
        (di, dj)
        for di in range(1, 7)
        for dj in range(1, 7)
        if gcd(di, dj) == 1
    )
)

_MOVE_DI = np.array([m[0] for m in MOVES], dtype=np.int64)
_MOVE_DJ = np.array([m[1] for m in MOVES], dtype=np.int64)


@njit(cache=True)
def edge_cost(q1, q2, i0, j0, di, dj):
    """Cost of moving from lattice node (i0, j0) to (i0+di, j0+dj).

    Integrates (q1(t) - q2(gamma(t)) * sqrt(slope))^2 over the step with
    gamma linear on the segment, sampling at unit lattice points.
    """
    n = q1.shape[0]
    h = 1.0 / (n - 1)
    slope = dj / di
    rs = np.sqrt(slope)
    c = 0.0
    for s in range(di + 1):
        pos = j0 + slope * s  # lattice units along q2's axis
        k = int(pos)
        if k >= n - 1:
            qv = q2[n - 1]
        else:
            fr = pos - k
            qv = q2[k] * (1.0 - fr) + q2[k + 1] * fr
        diff = q1[i0 + s] - rs * qv
        w = 0.5 if (s == 0 or s == di) else 1.0
        c += w * diff * diff * h
    return c


@njit(cache=True)
def _solve(q1, q2, move_di, move_dj):
    n = q1.shape[0]
    cost = np.full((n, n), np.inf)
    best_move = np.full((n, n), -1, dtype=np.int64)
    cost[0, 0] = 0.0
    for i in range(1, n):
        for j in range(1, n):
            best = np.inf
            bm = -1
            for m in range(move_di.shape[0]):
                di = move_di[m]
                dj = move_dj[m]
                i0 = i - di
                j0 = j - dj
                if i0 < 0 or j0 < 0:
                    continue
                c0 = cost[i0, j0]
                if c0 == np.inf:
                    continue
                tot = c0 + edge_cost(q1, q2, i0, j0, di, dj)
                if tot < best:
                    best = tot
                    bm = m
            cost[i, j] = best
            best_move[i, j] = bm
    return cost, best_move


@njit(cache=True)
def _solve_banded(q1, q2, center, band, move_di, move_dj):
    """DP restricted to |j - center[i]| <= band; used by the coarse-to-fine
    refinement where the optimum is known to lie near the coarse path."""
    n = q1.shape[0]
    cost = np.full((n, n), np.inf)
    best_move = np.full((n, n), -1, dtype=np.int64)
    cost[0, 0] = 0.0
    for i in range(1, n):
        jlo = max(1, center[i] - band)
        jhi = min(n - 1, center[i] + band)
        for j in range(jlo, jhi + 1):
            best = np.inf
            bm = -1
            for m in range(move_di.shape[0]):
                di = move_di[m]
                dj = move_dj[m]
                i0 = i - di
                j0 = j - dj
                if i0 < 0 or j0 < 0:
                    continue
                c0 = cost[i0, j0]
                if c0 == np.inf:
                    continue
                tot = c0 + edge_cost(q1, q2, i0, j0, di, dj)
                if tot < best:
                    best = tot
                    bm = m
            cost[i, j] = best
            best_move[i, j] = bm
    return cost, best_move


def _backtrack(cost, best_move, n):
    total = cost[n - 1, n - 1]
    if not np.isfinite(total):
        raise RuntimeError("alignment lattice target unreachable")
    nodes = [(n - 1, n - 1)]
    i, j = n - 1, n - 1
    while (i, j) != (0, 0):
        m = best_move[i, j]
        i -= MOVES[m][0]
        j -= MOVES[m][1]
        nodes.append((i, j))
    nodes.reverse()
    return float(total), np.array(nodes, dtype=np.int64)


def solve_lattice(q1: np.ndarray, q2: np.ndarray):
    """Minimum alignment cost and optimal lattice path.

    Returns ``(total_cost, path)`` where ``path`` is an (m, 2) integer
    array of lattice nodes from (0, 0) to (n-1, n-1).
    """
    n = q1.shape[0]
    cost, best_move = _solve(
        np.ascontiguousarray(q1, dtype=np.float64),
        np.ascontiguousarray(q2, dtype=np.float64),
        _MOVE_DI,
        _MOVE_DJ,
    )
    return _backtrack(cost, best_move, n)


def _resample_unit(values: np.ndarray, n: int) -> np.ndarray:
    src = np.linspace(0.0, 1.0, values.shape[0])
    return np.interp(np.linspace(0.0, 1.0, n), src, values)


def solve_refined(
    q1: np.ndarray, q2: np.ndarray, dp_grid: int, refine_levels: int = 2,
    band: int = 5,
):
    """Coarse-to-fine alignment: a full DP on the ``dp_grid`` lattice, then
    banded DP passes at doubled resolutions around the previous path. This
    shrinks the half-cell vertex quantization of a single-resolution search
    at roughly the cost of the coarse pass.

    Returns ``(path, resolution)`` of the finest pass; the path cost is not
    comparable across resolutions, so only the path is reported.
    """
    m = dp_grid
    _, path = solve_lattice(_resample_unit(q1, m), _resample_unit(q2, m))
    for _ in range(refine_levels):
        m2 = 2 * m - 1
        # carry the path to the doubled lattice as the band center
        xs = np.arange(m2)
        center = np.rint(
            np.interp(xs, 2 * path[:, 0], 2 * path[:, 1])
        ).astype(np.int64)
        cost, best_move = _solve_banded(
            np.ascontiguousarray(_resample_unit(q1, m2)),
            np.ascontiguousarray(_resample_unit(q2, m2)),
            center,
            band,
            _MOVE_DI,
            _MOVE_DJ,
        )
        _, path = _backtrack(cost, best_move, m2)
        m = m2
    return path, m
