"""Hidden-state machinery for phase: clustering of warp slope functions,
combined state chains, transition estimation, warp prediction, and the
misclassified-chain transition oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .curves import Curve, Grid
from .exceptions import DegenerateOracleError, ModelFitError
from .registration import Srsf, WarpingFunction, srsf_of_warping, warping_of_srsf


@dataclass(frozen=True)
class StateChain:
    """Per-time-index hidden-state labels with one-hot indicators.

    Labels are 1-based, matching the usual state-space notation.
    """

    labels: np.ndarray
    n_states: int

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int).copy()
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)
        if labels.ndim != 1 or labels.size == 0:
            raise ValueError("labels must be a nonempty vector")
        if labels.min() < 1 or labels.max() > self.n_states:
            raise ValueError("labels must lie in 1..n_states")

    def __len__(self) -> int:
        return self.labels.size

    @property
    def indicators(self) -> np.ndarray:
        """(N, K) one-hot rows."""
        out = np.zeros((self.labels.size, self.n_states))
        out[np.arange(self.labels.size), self.labels - 1] = 1.0
        return out


@dataclass(frozen=True)
class Prototypes:
    """Cluster centroids on the warp sphere and their warping functions."""

    centroid_srsfs: tuple
    warpings: tuple

    @property
    def g(self) -> int:
        return len(self.centroid_srsfs)


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic square matrix."""

    entries: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.entries, dtype=float).copy()
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("transition matrix must be square")
        if np.min(m) < -1e-10 or np.max(m) > 1.0 + 1e-10:
            raise ValueError("transition entries must lie in [0, 1]")
        rows = m.sum(axis=1)
        if np.max(np.abs(rows - 1.0)) > 1e-10:
            raise ValueError("transition rows must sum to 1")
        m = np.clip(m, 0.0, 1.0)
        m.flags.writeable = False
        object.__setattr__(self, "entries", m)

    @property
    def n_states(self) -> int:
        return self.entries.shape[0]


def _quad_weights(grid: Grid) -> np.ndarray:
    return grid.quad_weights()


def _cosine(x: np.ndarray, c: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted cosine similarity between rows of x and rows of c."""
    num = (x * w) @ c.T
    nx = np.sqrt(np.maximum((x * w * x).sum(axis=1), 1e-300))
    nc = np.sqrt(np.maximum((c * w * c).sum(axis=1), 1e-300))
    return num / np.outer(nx, nc)


def _kmeanspp_indices(dist_to_chosen, n: int, k: int, rng) -> list:
    """k-means++ style seeding; dist_to_chosen(idx) gives each point's
    distance to the proposed centroid at ``idx``."""
    first = int(rng.integers(n))
    chosen = [first]
    d = dist_to_chosen(first)
    for _ in range(1, k):
        weights = np.maximum(d, 0.0)
        total = weights.sum()
        if total <= 0:
            # all points coincide with a centroid; pick any unchosen index
            remaining = [i for i in range(n) if i not in chosen]
            nxt = remaining[int(rng.integers(len(remaining)))]
        else:
            nxt = int(rng.choice(n, p=weights / total))
        chosen.append(nxt)
        d = np.minimum(d, dist_to_chosen(nxt))
    return chosen


def _spherical_lloyd(X: np.ndarray, w: np.ndarray, g: int, rng):
    """One seeded run of spherical k-means. Returns (labels0, centroids,
    objective_history); labels are 0-based here."""
    n = X.shape[0]

    def dist_to(idx):
        return 1.0 - _cosine(X, X[idx : idx + 1], w)[:, 0]

    centroids = X[_kmeanspp_indices(dist_to, n, g, rng)].copy()
    labels = np.full(n, -1)
    history = []
    for _ in range(100):
        cos = _cosine(X, centroids, w)
        new_labels = np.argmax(cos, axis=1)
        # re-seed empty clusters at the worst-served point
        for k in range(g):
            if not np.any(new_labels == k):
                worst = int(np.argmin(cos[np.arange(n), new_labels]))
                centroids[k] = X[worst]
                cos = _cosine(X, centroids, w)
                new_labels = np.argmax(cos, axis=1)
        history.append(float(np.sum(1.0 - cos[np.arange(n), new_labels])))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for k in range(g):
            members = X[labels == k]
            m = members.mean(axis=0)
            norm = np.sqrt(np.sum(m * w * m))
            centroids[k] = m / max(norm, 1e-300)
    return labels, centroids, history


def spherical_kmeans(
    srsfs, g: int, seed: int = 0, restarts: int = 10
) -> tuple[Prototypes, StateChain]:
    """Cluster warp slope functions on the sphere, minimizing the total
    cosine dissimilarity; best of ``restarts`` seeded initializations."""
    srsfs = list(srsfs)
    if not srsfs:
        raise ModelFitError("no slope functions to cluster")
    if g < 1 or g > len(srsfs):
        raise ModelFitError(f"need 1 <= g <= {len(srsfs)}, got {g}")
    grid = srsfs[0].grid
    X = np.stack([s.values for s in srsfs])
    w = _quad_weights(grid)

    best = None
    for ss in np.random.SeedSequence(seed).spawn(restarts):
        labels, centroids, history = _spherical_lloyd(
            X, w, g, np.random.default_rng(ss)
        )
        if best is None or history[-1] < best[0] - 1e-15:
            best = (history[-1], labels, centroids)
    _, labels, centroids = best

    protos = []
    warps = []
    for k in range(g):
        c = centroids[k]
        norm = np.sqrt(np.trapezoid(c * c, dx=grid.spacing))
        s = Srsf(Curve(grid, np.maximum(c, 0.0) / norm), kind="warp")
        protos.append(s)
        warps.append(warping_of_srsf(s))
    chain = StateChain(labels + 1, g)
    return Prototypes(tuple(protos), tuple(warps)), chain


def _euclidean_lloyd(X: np.ndarray, k: int, rng):
    n = X.shape[0]

    def dist_to(idx):
        return np.sum((X - X[idx]) ** 2, axis=1)

    centroids = X[_kmeanspp_indices(dist_to, n, k, rng)].copy()
    labels = np.full(n, -1)
    wcss = np.inf
    for _ in range(100):
        d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(d2, axis=1)
        for kk in range(k):
            if not np.any(new_labels == kk):
                worst = int(np.argmax(d2[np.arange(n), new_labels]))
                centroids[kk] = X[worst]
                d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
                new_labels = np.argmin(d2, axis=1)
        wcss = float(d2[np.arange(n), new_labels].sum())
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for kk in range(k):
            centroids[kk] = X[labels == kk].mean(axis=0)
    return labels, centroids, wcss


def kmeans_scores(
    score_vectors, l: int, seed: int = 0, restarts: int = 10
) -> StateChain:
    """Euclidean k-means over score vectors, best of restarts by
    within-cluster sum of squares."""
    X = np.atleast_2d(np.asarray(score_vectors, dtype=float))
    n = X.shape[0]
    if l < 1 or l > n:
        raise ModelFitError(f"need 1 <= l <= {n}, got {l}")
    if l == 1:
        return StateChain(np.ones(n, dtype=int), 1)
    best = None
    for ss in np.random.SeedSequence(seed).spawn(restarts):
        labels, _, wcss = _euclidean_lloyd(X, l, np.random.default_rng(ss))
        if best is None or wcss < best[0] - 1e-15:
            best = (wcss, labels)
    return StateChain(best[1] + 1, l)


def cluster_centroids(score_vectors, chain: StateChain) -> np.ndarray:
    """Per-state means of the score vectors (the converged centroids)."""
    X = np.atleast_2d(np.asarray(score_vectors, dtype=float))
    out = np.zeros((chain.n_states, X.shape[1]))
    for k in range(1, chain.n_states + 1):
        members = X[chain.labels == k]
        out[k - 1] = members.mean(axis=0) if members.size else np.inf
    return out


def combine_states(phase: StateChain, amp: StateChain) -> StateChain:
    """Kronecker combination: indicator is kron(phase, amplitude) per index."""
    if len(phase) != len(amp):
        raise ValueError("state chains must have equal length")
    labels = (phase.labels - 1) * amp.n_states + amp.labels
    return StateChain(labels, phase.n_states * amp.n_states)


def ls_transition(chain: StateChain) -> TransitionMatrix:
    """Least squares transition estimate from indicator vectors.

    The normal equations of min_P sum ||w_n - w_{n-1} P||^2 reduce to
    row-normalized one-step transition counts; rows of states never seen
    as a source fall back to the uniform distribution.
    """
    if len(chain) < 2:
        raise ValueError("need at least two time indices")
    k = chain.n_states
    counts = np.zeros((k, k))
    a = chain.labels[:-1] - 1
    b = chain.labels[1:] - 1
    np.add.at(counts, (a, b), 1.0)
    totals = counts.sum(axis=1)
    out = np.full((k, k), 1.0 / k)
    visited = totals > 0
    out[visited] = counts[visited] / totals[visited, None]
    return TransitionMatrix(out)


def _project_simplex_row(v: np.ndarray) -> np.ndarray:
    """Euclidean projection of a vector onto the probability simplex
    (sorted-threshold algorithm)."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, v.size + 1)
    cond = u + (1.0 - css) / idx > 0
    rho = idx[cond][-1]
    theta = (1.0 - css[rho - 1]) / rho
    return np.maximum(v + theta, 0.0)


def project_stochastic(matrix) -> TransitionMatrix:
    """Closest stochastic matrix in Frobenius norm: the norm decomposes by
    rows, so project each row onto the simplex."""
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    out = np.stack([_project_simplex_row(row) for row in m])
    # guard against accumulated rounding in the row sums
    out /= out.sum(axis=1, keepdims=True)
    return TransitionMatrix(out)


def predict_warp_indicator(
    indicator, transition: TransitionMatrix, g: int, l: int
) -> np.ndarray:
    """One-step phase-state distribution: propagate the combined indicator
    through the transition matrix, then sum amplitude blocks (the block
    aggregation matrix collapses each phase state's l columns)."""
    w = np.asarray(indicator, dtype=float)
    if transition.n_states != g * l or w.size != g * l:
        raise ValueError("indicator / transition dimensions must be g*l")
    return (w @ transition.entries).reshape(g, l).sum(axis=1)


def predict_warping(
    indicator, prototypes: Prototypes, mode: str = "soft"
) -> WarpingFunction:
    """Warp prediction from a phase-state distribution.

    Soft mode takes the convex combination of prototype warpings (valid by
    convexity); hard mode returns the argmax prototype, lowest index on ties.
    """
    w = np.asarray(indicator, dtype=float)
    if w.size != prototypes.g:
        raise ValueError("indicator length must match number of prototypes")
    if np.min(w) < -1e-12 or abs(w.sum() - 1.0) > 1e-8:
        raise ValueError("indicator must be a probability vector")
    if mode == "hard":
        return prototypes.warpings[int(np.argmax(w))]
    if mode != "soft":
        raise ValueError("mode must be 'soft' or 'hard'")
    grid = prototypes.warpings[0].grid
    vals = np.zeros(grid.n_points)
    for wk, proto in zip(w, prototypes.warpings):
        vals += wk * proto.values
    return WarpingFunction.from_values(grid, vals)


def warp_state_weights(gamma: WarpingFunction, prototypes: Prototypes) -> np.ndarray:
    """State probabilities proportional to inverse cosine dissimilarity
    between the warp and each prototype on the slope-function sphere."""
    s = srsf_of_warping(gamma)
    w = _quad_weights(s.grid)
    cents = np.stack([p.values for p in prototypes.centroid_srsfs])
    cos = _cosine(s.values[None, :], cents, w)[0]
    cos = np.minimum(cos, 1.0 - 1e-9)
    inv = 1.0 / (1.0 - cos)
    return inv / inv.sum()


@dataclass(frozen=True)
class MisclassOracleInput:
    """Ingredients of the estimated-chain transition law: the true combined
    transition matrix, per-component confusion matrices P(estimated | true),
    and the stationary law of the true combined chain."""

    true_transition: TransitionMatrix
    confusion_phase: np.ndarray
    confusion_amp: np.ndarray
    joint_stationary: np.ndarray

    def __post_init__(self):
        cf = np.asarray(self.confusion_phase, dtype=float)
        ca = np.asarray(self.confusion_amp, dtype=float)
        pi = np.asarray(self.joint_stationary, dtype=float)
        object.__setattr__(self, "confusion_phase", cf)
        object.__setattr__(self, "confusion_amp", ca)
        object.__setattr__(self, "joint_stationary", pi)
        for name, m in (("confusion_phase", cf), ("confusion_amp", ca)):
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise ValueError(f"{name} must be square")
            if np.max(np.abs(m.sum(axis=1) - 1.0)) > 1e-10:
                raise ValueError(f"{name} rows must sum to 1")
        g, l = cf.shape[0], ca.shape[0]
        if self.true_transition.n_states != g * l:
            raise ValueError("true transition must act on g*l combined states")
        if pi.size != g * l:
            raise ValueError("stationary law must have g*l entries")
        if abs(pi.sum() - 1.0) > 1e-8:
            raise ValueError("stationary law must sum to 1")
        if np.max(np.abs(pi @ self.true_transition.entries - pi)) > 1e-8:
            raise ValueError("stationary law must satisfy pi P = pi")

    @property
    def g(self) -> int:
        return self.confusion_phase.shape[0]

    @property
    def l(self) -> int:
        return self.confusion_amp.shape[0]


def oracle_estimated_transition(inp: MisclassOracleInput) -> TransitionMatrix:
    """Transition law of the estimated combined chain.

    For each pair of estimated states, sums over true states the product of
    the true transition, the next-step confusions, and the Bayes posterior
    of the current true state given the current estimated state under the
    stationary law.
    """
    g, l = inp.g, inp.l
    cf, ca = inp.confusion_phase, inp.confusion_amp
    pi = inp.joint_stationary.reshape(g, l)
    p = inp.true_transition.entries.reshape(g, l, g, l)

    # joint(i_f, i_a, hat_if, hat_ia) = Cf[i_f, hat_if] Ca[i_a, hat_ia] pi[i_f, i_a]
    joint = np.einsum("fF,aA,fa->faFA", cf, ca, pi)
    denom = joint.sum(axis=(0, 1))  # marginal of each estimated state
    if np.any(denom <= 0):
        raise DegenerateOracleError("an estimated state has zero probability")
    posterior = joint / denom[None, None, :, :]

    # next(i_f, i_a, hat_jf, hat_ja) = sum_{j_f, j_a} P[i,j] Cf[j_f, hat_jf] Ca[j_a, hat_ja]
    nxt = np.einsum("faGB,GJ,BK->faJK", p, cf, ca)
    tilde = np.einsum("faFA,faJK->FAJK", posterior, nxt)
    return TransitionMatrix(tilde.reshape(g * l, g * l))
