"""Functional PCA, switching-coefficient vector autoregression on scores,
prediction-error criteria, and the amplitude-only baseline predictor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curves import Curve
from .exceptions import ModelFitError
from .warp_model import StateChain


@dataclass(frozen=True)
class FpcaModel:
    """Eigendecomposition of the sample covariance operator.

    ``eigenvalues`` holds the full computed spectrum (descending); only the
    first ``d`` eigenfunctions and score columns are retained.
    """

    mean: Curve
    eigenfunctions: tuple
    eigenvalues: np.ndarray
    scores: np.ndarray
    d: int
    truncated: bool = False

    def eigen_tail(self, d: int | None = None) -> float:
        """Sum of eigenvalues beyond dimension ``d``."""
        d = self.d if d is None else d
        return float(self.eigenvalues[d:].sum())

    def scores_of(self, curve: Curve) -> np.ndarray:
        """Project a curve onto the retained eigenfunctions."""
        w = self.mean.grid.quad_weights()
        centered = curve.values - self.mean.values
        return np.array(
            [float(np.sum(centered * nu.values * w)) for nu in self.eigenfunctions]
        )

    def reconstruct(self, scores) -> Curve:
        """Mean plus the score-weighted eigenfunction expansion."""
        vals = self.mean.values.copy()
        for s, nu in zip(np.asarray(scores, dtype=float), self.eigenfunctions):
            vals = vals + s * nu.values
        return Curve(self.mean.grid, vals)


def fpca(curves, d: int) -> FpcaModel:
    """Functional PCA by quadrature-weighted eigendecomposition of the
    pointwise sample covariance; eigenfunctions are unit-norm with the
    largest-magnitude value positive, so scores are reproducible."""
    curves = list(curves)
    n = len(curves)
    if n < 1 or d < 1:
        raise ModelFitError("need at least one curve and d >= 1")
    grid = curves[0].grid
    X = np.stack([c.values for c in curves])
    mu = X.mean(axis=0)
    Xc = X - mu
    w = grid.quad_weights()
    sw = np.sqrt(w)

    cov = (Xc.T @ Xc) / n
    sym = sw[:, None] * cov * sw[None, :]
    evals, evecs = np.linalg.eigh(sym)
    order = np.argsort(evals)[::-1]
    evals = np.maximum(evals[order], 0.0)
    evecs = evecs[:, order]

    n_pos = int(np.sum(evals > max(evals[0], 1e-300) * 1e-10))
    truncated = d > n_pos
    d_eff = min(d, max(n_pos, 1))

    funcs = []
    for m in range(d_eff):
        v = evecs[:, m] / sw
        norm = np.sqrt(np.trapezoid(v * v, dx=grid.spacing))
        v = v / norm
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        funcs.append(Curve(grid, v))

    scores = np.stack([(Xc * f.values * w).sum(axis=1) for f in funcs], axis=1)
    return FpcaModel(
        mean=Curve(grid, mu),
        eigenfunctions=tuple(funcs),
        eigenvalues=evals,
        scores=scores,
        d=d_eff,
        truncated=truncated,
    )


@dataclass(frozen=True)
class SwitchingVarModel:
    """VAR(p) on score vectors whose coefficients switch with the hidden
    phase state of the preceding index."""

    order: int
    dim: int
    n_states: int
    coefficients: tuple  # g entries, each a (p, d, d) array
    residual_cov: np.ndarray
    per_state_counts: np.ndarray
    fallback_states: tuple = field(default=())

    def state_prediction(self, recent_scores: np.ndarray, state: int) -> np.ndarray:
        """One-step prediction under a fixed state; ``recent_scores`` rows
        are most-recent-first."""
        recent = np.atleast_2d(np.asarray(recent_scores, dtype=float))
        if recent.shape != (self.order, self.dim):
            raise ValueError(
                f"recent scores must be {self.order} x {self.dim}, got {recent.shape}"
            )
        coefs = self.coefficients[state - 1]
        out = np.zeros(self.dim)
        for h in range(self.order):
            out += coefs[h] @ recent[h]
        return out


def _regression_rows(scores: np.ndarray, p: int):
    """Design rows [y_{T-1}, ..., y_{T-p}] and targets y_T for T = p..N-1."""
    n, d = scores.shape
    targets = scores[p:]
    design = np.hstack([scores[p - h : n - h] for h in range(1, p + 1)])
    return design, targets


def _solve_var(design: np.ndarray, targets: np.ndarray, p: int, d: int) -> np.ndarray:
    beta, *_ = np.linalg.lstsq(design, targets, rcond=None)
    # beta is (p*d, d): block h holds Phi_h transposed
    return np.stack([beta[h * d : (h + 1) * d].T for h in range(p)])


def fit_switching_var(
    scores, phase_labels: StateChain, p: int, g: int
) -> SwitchingVarModel:
    """Per-state least squares: the regression set of state k collects the
    observations whose previous index carries phase label k. States with
    fewer than p*d + 1 assigned observations fall back to the pooled fit.
    """
    scores = np.atleast_2d(np.asarray(scores, dtype=float))
    n, d = scores.shape
    if len(phase_labels) != n:
        raise ValueError("phase labels must align with score rows")
    if phase_labels.n_states > g:
        raise ValueError("phase chain has more states than g")
    if n <= p:
        raise ModelFitError(f"need more than p={p} observations")

    design, targets = _regression_rows(scores, p)
    states = phase_labels.labels[p - 1 : n - 1]  # label of index T-1
    pooled = _solve_var(design, targets, p, d)

    coefs = []
    counts = np.zeros(g, dtype=int)
    fallbacks = []
    for k in range(1, g + 1):
        mask = states == k
        counts[k - 1] = int(mask.sum())
        if counts[k - 1] < p * d + 1:
            coefs.append(pooled)
            fallbacks.append(k)
            continue
        coefs.append(_solve_var(design[mask], targets[mask], p, d))

    residuals = targets.copy()
    for k in range(1, g + 1):
        mask = states == k
        if not np.any(mask):
            continue
        c = coefs[k - 1]
        pred = np.zeros((int(mask.sum()), d))
        for h in range(p):
            pred += design[mask][:, h * d : (h + 1) * d] @ c[h].T
        residuals[mask] -= pred

    denom = max(n - p - g * p * d, 1)
    cov = (residuals.T @ residuals) / denom
    cov = 0.5 * (cov + cov.T)
    return SwitchingVarModel(
        order=p,
        dim=d,
        n_states=g,
        coefficients=tuple(coefs),
        residual_cov=cov,
        per_state_counts=counts,
        fallback_states=tuple(fallbacks),
    )


def predict_scores_binary(
    model: SwitchingVarModel, recent_scores, state: int
) -> np.ndarray:
    """Prediction committed to a single hidden state."""
    if not 1 <= state <= model.n_states:
        raise ValueError(f"state must lie in 1..{model.n_states}")
    return model.state_prediction(np.asarray(recent_scores, dtype=float), state)


def predict_scores_weighted(
    model: SwitchingVarModel, recent_scores, weights
) -> np.ndarray:
    """State-probability mixture of the per-state predictions; lower
    variance, higher bias than the binary predictor."""
    w = np.asarray(weights, dtype=float)
    if w.size != model.n_states:
        raise ValueError("weights length must match number of states")
    if np.min(w) < -1e-12 or abs(w.sum() - 1.0) > 1e-8:
        raise ValueError("weights must be a probability vector")
    recent = np.asarray(recent_scores, dtype=float)
    out = np.zeros(model.dim)
    for k in range(1, model.n_states + 1):
        if w[k - 1] > 0:
            out += w[k - 1] * model.state_prediction(recent, k)
    return out


def ffpe_modified(
    p: int, d: int, N: int, g: int, residual_trace: float, eigen_tail: float
) -> float:
    """Prediction-error criterion for the switching model:
    (N + g p d)/N * trace + eigenvalue tail."""
    if min(p, d, N, g) < 1:
        raise ValueError("p, d, N, g must be positive")
    return (N + g * p * d) / N * residual_trace + eigen_tail


def ffpe_standard(
    p: int, d: int, N: int, residual_trace: float, eigen_tail: float
) -> float:
    """Classic criterion for the single-regime model:
    (N + p d)/(N - p d) * trace + eigenvalue tail."""
    if min(p, d, N) < 1:
        raise ValueError("p, d, N must be positive")
    if N <= p * d:
        raise ValueError("need N > p*d")
    return (N + p * d) / (N - p * d) * residual_trace + eigen_tail


@dataclass(frozen=True)
class FfpeSelection:
    chosen_p: int
    chosen_d: int
    criterion_table: dict


def select_order(
    curves, phase_labels: StateChain, p_max: int, d_max: int, g: int
) -> FfpeSelection:
    """Grid-minimize the modified criterion over (p, d); ties resolve to the
    smallest d, then the smallest p."""
    curves = list(curves)
    n = len(curves)
    model = fpca(curves, d_max)
    table = {}
    best = None
    for d in range(1, model.d + 1):
        tail = model.eigen_tail(d)
        for p in range(1, p_max + 1):
            if n <= p:
                continue
            var = fit_switching_var(model.scores[:, :d], phase_labels, p, g)
            crit = ffpe_modified(
                p, d, n, g, float(np.trace(var.residual_cov)), tail
            )
            table[(p, d)] = crit
            if best is None or crit < best[0]:
                best = (crit, p, d)
    if best is None:
        raise ModelFitError("no feasible (p, d) candidate")
    return FfpeSelection(chosen_p=best[1], chosen_d=best[2], criterion_table=table)


def _single_chain(n: int) -> StateChain:
    return StateChain(np.ones(n, dtype=int), 1)


def select_order_standard(curves, p_max: int, d_max: int) -> FfpeSelection:
    """Grid-minimize the classic criterion for the single-regime model,
    with the residual covariance normalized by the sample size."""
    curves = list(curves)
    n = len(curves)
    model = fpca(curves, d_max)
    table = {}
    best = None
    for d in range(1, model.d + 1):
        tail = model.eigen_tail(d)
        for p in range(1, p_max + 1):
            if n <= p * d or n <= p:
                continue
            var = fit_switching_var(model.scores[:, :d], _single_chain(n), p, 1)
            denom = max(n - p - p * d, 1)
            trace = float(np.trace(var.residual_cov)) * denom / n
            crit = ffpe_standard(p, d, n, trace, tail)
            table[(p, d)] = crit
            if best is None or crit < best[0]:
                best = (crit, p, d)
    if best is None:
        raise ModelFitError("no feasible (p, d) candidate")
    return FfpeSelection(chosen_p=best[1], chosen_d=best[2], criterion_table=table)


@dataclass(frozen=True)
class AoModel:
    """Registration-free baseline: functional PCA plus a single-regime
    VAR(p) on the score vectors."""

    fpca: FpcaModel
    var: SwitchingVarModel
    p: int
    d: int

    def predict_next(self, history=None) -> Curve:
        """One-step prediction; ``history`` defaults to the training
        sample's scores, otherwise the trailing curves are projected."""
        if history is None:
            recent = self.fpca.scores[::-1][: self.p]
        else:
            history = list(history)
            if len(history) < self.p:
                raise ModelFitError("history shorter than the model order")
            recent = np.stack(
                [self.fpca.scores_of(c) for c in history[::-1][: self.p]]
            )
        pred = self.var.state_prediction(recent, 1)
        return self.fpca.reconstruct(pred)


def fit_ao(
    curves, p: int | None = None, d: int | None = None,
    p_max: int = 3, d_max: int = 6,
) -> AoModel:
    """Fit the baseline; (p, d) come from the classic criterion when not
    supplied."""
    curves = list(curves)
    n = len(curves)
    if p is None or d is None:
        sel = select_order_standard(curves, p_max, d_max)
        p = sel.chosen_p if p is None else p
        d = sel.chosen_d if d is None else d
    if n <= p:
        raise ModelFitError("need more curves than the VAR order")
    model = fpca(curves, d)
    var = fit_switching_var(model.scores, _single_chain(n), p, 1)
    return AoModel(fpca=model, var=var, p=p, d=model.d)


def ao_predict(curves, p: int | None = None, d: int | None = None) -> Curve:
    """One-step amplitude-only prediction of the next curve."""
    return fit_ao(curves, p=p, d=d).predict_next()
