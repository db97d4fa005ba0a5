"""Hypothesis scoring: univariate correlation summaries, joint ridge r²,
conditional residual-on-residual r², and random-projection variants.

The ridge loss is mean squared error plus an L2 penalty,

    L(b) = (1/T) * ||Y - X b||^2 + lam * ||b||^2

so the normal equations carry a T-scaled penalty: (X'X + T*lam*I) b = X'Y.
The model is selected by k-fold cross-validation over a small lambda grid,
with folds taken as contiguous time blocks so the validation range never
overlaps the training range.  Out-of-sample r² is computed against the
validation mean and clamped to [0, 1] at the score level.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy import linalg

from .model import (
    CauseRankError,
    FamilyTable,
    Hypothesis,
    PlotData,
    ScoreMethod,
    ScoreReport,
)
from .stats import chebyshev_pvalue

DEFAULT_LAMBDA_GRID = tuple(np.geomspace(1e-3, 1e6, 5))


class DegenerateTarget(CauseRankError):
    def __init__(self):
        super().__init__("every target output has zero variance")


class NumericalFailure(CauseRankError):
    pass


@dataclass(frozen=True)
class ScoringConfig:
    method: ScoreMethod = ScoreMethod.L2
    k_folds: int = 5
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    proj_dim: Optional[int] = None
    proj_samples: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.k_folds < 2:
            raise ValueError("k_folds must be >= 2")
        grid = tuple(float(l) for l in self.lambda_grid)
        if not grid or any(l <= 0 for l in grid) or list(grid) != sorted(grid):
            raise ValueError("lambda_grid must be non-empty, positive and ascending")
        object.__setattr__(self, "lambda_grid", grid)
        if self.proj_dim is not None and self.proj_dim < 1:
            raise ValueError("proj_dim must be >= 1 when set")
        if self.proj_samples < 1:
            raise ValueError("proj_samples must be >= 1")

    def method_label(self) -> str:
        if self.method is ScoreMethod.CORR_MEAN:
            return "CorrMean"
        if self.method is ScoreMethod.CORR_MAX:
            return "CorrMax"
        if self.method is ScoreMethod.L2:
            return "L2"
        return f"L2-P{self.effective_proj_dim()}"

    def effective_proj_dim(self) -> int:
        return 50 if self.proj_dim is None else self.proj_dim

    def with_seed(self, seed: int) -> "ScoringConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class RegressionResult:
    """Outcome of a ridge regression with cross-validated lambda."""

    coefficients: np.ndarray  # F_x x F_y
    predictions: np.ndarray  # T x F_y, original target units
    residuals: np.ndarray  # T x F_y, Y - predictions
    cv_r2: float  # best mean validation r² (unclamped, <= 1)
    chosen_lambda: float


def as_matrix(a) -> np.ndarray:
    """Coerce a vector or matrix to a T x F float64 matrix."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise ValueError(f"expected 1-D or 2-D input, got shape {m.shape}")
    return m


# ---------------------------------------------------------------------------
# Univariate scoring
# ---------------------------------------------------------------------------


def pearson_matrix(X, Y) -> np.ndarray:
    """Pairwise Pearson correlations; zero-variance columns contribute 0."""
    X = as_matrix(X)
    Y = as_matrix(Y)
    if X.shape[0] != Y.shape[0]:
        raise ValueError("X and Y must have the same number of rows")
    if X.shape[0] < 2:
        raise ValueError("need at least two data points")
    Xc = X - X.mean(axis=0)
    Yc = Y - Y.mean(axis=0)
    xn = np.linalg.norm(Xc, axis=0)
    yn = np.linalg.norm(Yc, axis=0)
    denom = np.outer(xn, yn)
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(denom > 0, (Xc.T @ Yc) / np.where(denom > 0, denom, 1.0), 0.0)
    return np.clip(rho, -1.0, 1.0)


def corr_mean(X, Y) -> float:
    return float(np.mean(np.abs(pearson_matrix(X, Y))))


def corr_max(X, Y) -> float:
    return float(np.max(np.abs(pearson_matrix(X, Y))))


# ---------------------------------------------------------------------------
# Ridge regression
# ---------------------------------------------------------------------------


def ridge_fit(X, Y, lam: float) -> RegressionResult:
    """Solve (X'X + T*lam*I) b = X'Y on the inputs as given (no rescaling)."""
    if lam <= 0:
        raise ValueError("lam must be > 0")
    X = as_matrix(X)
    Y = as_matrix(Y)
    T = X.shape[0]
    beta = _ridge_solve(X, Y, T * lam)
    pred = X @ beta
    train_r2 = _r2_against_mean(Y, pred)
    return RegressionResult(
        coefficients=beta,
        predictions=pred,
        residuals=Y - pred,
        cv_r2=train_r2,
        chosen_lambda=float(lam),
    )


def _ridge_solve(X: np.ndarray, Y: np.ndarray, penalty: float) -> np.ndarray:
    T, p = X.shape
    try:
        if p <= T:
            G = X.T @ X + penalty * np.eye(p)
            return linalg.cho_solve(linalg.cho_factor(G, lower=True), X.T @ Y)
        # dual form: b = X'(XX' + penalty I)^{-1} Y, cheaper when p > T
        K = X @ X.T + penalty * np.eye(T)
        return X.T @ linalg.cho_solve(linalg.cho_factor(K, lower=True), Y)
    except linalg.LinAlgError as e:  # cannot happen for penalty > 0
        raise NumericalFailure(f"regularised normal matrix not positive definite: {e}") from e


def _r2_against_mean(Y: np.ndarray, pred: np.ndarray) -> float:
    resid = Y - pred
    tss = np.sum((Y - Y.mean(axis=0)) ** 2, axis=0)
    rss = np.sum(resid**2, axis=0)
    ok = tss > 0
    if not np.any(ok):
        return 0.0
    return float(np.mean(1.0 - rss[ok] / tss[ok]))


def ols_fit(X, Y) -> RegressionResult:
    """Least-squares fit with an intercept (the lambda -> 0 limit)."""
    X = as_matrix(X)
    Y = as_matrix(Y)
    xm = X.mean(axis=0)
    ym = Y.mean(axis=0)
    beta, *_ = np.linalg.lstsq(X - xm, Y - ym, rcond=None)
    pred = (X - xm) @ beta + ym
    return RegressionResult(
        coefficients=beta,
        predictions=pred,
        residuals=Y - pred,
        cv_r2=_r2_against_mean(Y, pred),
        chosen_lambda=0.0,
    )


def ols_residuals(X, Z) -> np.ndarray:
    """Residual of each X column after OLS on Z (no intercept)."""
    X = as_matrix(X)
    Z = as_matrix(Z)
    beta, *_ = np.linalg.lstsq(Z, X, rcond=None)
    return X - Z @ beta


# ---------------------------------------------------------------------------
# Cross-validated scoring
# ---------------------------------------------------------------------------


@dataclass
class _CvOutcome:
    per_lambda: np.ndarray  # mean validation r² per lambda
    best_index: int

    @property
    def best_r2(self) -> float:
        return float(self.per_lambda[self.best_index])


def _standardize_stats(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = M.mean(axis=0)
    std = M.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    return mean, std


def time_folds(T: int, k_folds: int) -> list[np.ndarray]:
    """Contiguous time blocks covering 0..T-1 exactly once.

    The fold count adapts downward for short series (to at most T // 2,
    never below 2) so small fixtures can still be scored.
    """
    if T < 4:
        raise ValueError(f"need at least 4 data points, got {T}")
    k = max(2, min(k_folds, T // 2))
    return np.array_split(np.arange(T), k)


def _cv_grid(X: np.ndarray, Y: np.ndarray, config: ScoringConfig) -> _CvOutcome:
    """Mean validation r² per lambda over contiguous time-block folds.

    Since folds are contiguous, each fold's training Gram is the full Gram
    minus the validation block, so the T x p matrix is swept once instead
    of once per fold (training statistics stay fold-local as required).
    """
    T, p = X.shape
    if not np.any(Y.std(axis=0) > 0):
        raise DegenerateTarget()
    grid = np.asarray(config.lambda_grid)
    folds = time_folds(T, config.k_folds)
    k = len(folds)
    scores = np.full((k, len(grid)), np.nan)
    if p <= T - max(len(f) for f in folds):
        # global centering only conditions the Gram differences; per-fold
        # train means/scales are still applied exactly below
        Xc = X - X.mean(axis=0)
        Yc = Y - Y.mean(axis=0)
        g_full = Xc.T @ Xc
        h_full = Xc.T @ Yc
        sx_full = Xc.sum(axis=0)
        sy_full = Yc.sum(axis=0)
        for fi, val_idx in enumerate(folds):
            lo, hi = int(val_idx[0]), int(val_idx[-1]) + 1
            Xv = Xc[lo:hi]
            Yv = Yc[lo:hi]
            n_train = T - (hi - lo)
            xm = (sx_full - Xv.sum(axis=0)) / n_train
            ym = (sy_full - Yv.sum(axis=0)) / n_train
            g_train = g_full - Xv.T @ Xv - n_train * np.outer(xm, xm)
            h_train = h_full - Xv.T @ Yv - n_train * np.outer(xm, ym)
            xs = np.sqrt(np.maximum(np.diag(g_train) / n_train, 0.0))
            xs = np.where(xs > 0, xs, 1.0)
            g_std = g_train / np.outer(xs, xs)
            h_std = h_train / xs[:, None]
            tss = np.sum((Yv - Yv.mean(axis=0)) ** 2, axis=0)
            ok = tss > 0
            if not np.any(ok):
                continue
            eigval, eigvec = linalg.eigh(g_std)
            eigval = np.maximum(eigval, 0.0)
            C = eigvec.T @ h_std
            base = ((Xv - xm) / xs) @ eigvec
            for li, lam in enumerate(grid):
                beta_rot = C / (eigval + n_train * lam)[:, None]
                pred = base @ beta_rot + ym
                rss = np.sum((Yv - pred) ** 2, axis=0)
                scores[fi, li] = np.mean(1.0 - rss[ok] / tss[ok])
    else:
        # wide data: kernel-form solve on the materialised training block
        for fi, val_idx in enumerate(folds):
            train_idx = np.concatenate([f for fj, f in enumerate(folds) if fj != fi])
            Xt, Xv = X[train_idx], X[val_idx]
            Yt, Yv = Y[train_idx], Y[val_idx]
            xm, xs = _standardize_stats(Xt)
            ym = Yt.mean(axis=0)
            Xt = (Xt - xm) / xs
            Xv = (Xv - xm) / xs
            Yt = Yt - ym
            tss = np.sum((Yv - Yv.mean(axis=0)) ** 2, axis=0)
            ok = tss > 0
            if not np.any(ok):
                continue
            n_train = Xt.shape[0]
            eigval, eigvec = linalg.eigh(Xt @ Xt.T)
            eigval = np.maximum(eigval, 0.0)
            C = eigvec.T @ Yt
            base = (Xv @ Xt.T) @ eigvec
            for li, lam in enumerate(grid):
                alpha_rot = C / (eigval + n_train * lam)[:, None]
                pred = base @ alpha_rot + ym
                rss = np.sum((Yv - pred) ** 2, axis=0)
                scores[fi, li] = np.mean(1.0 - rss[ok] / tss[ok])
    with np.errstate(invalid="ignore"):
        per_lambda = np.nanmean(scores, axis=0)
    if np.all(np.isnan(per_lambda)):
        per_lambda = np.zeros(len(grid))
    per_lambda = np.nan_to_num(per_lambda, nan=-np.inf)
    best = int(np.argmax(per_lambda))  # ties resolve to the smaller lambda
    return _CvOutcome(per_lambda=per_lambda, best_index=best)


def cv_score(X, Y, config: Optional[ScoringConfig] = None) -> float:
    """Cross-validated r² of Y on X, clamped to [0, 1].

    Multivariate targets contribute the uniform mean of per-output r²;
    outputs with zero validation variance are excluded fold by fold.
    """
    config = config or ScoringConfig()
    outcome = _cv_grid(as_matrix(X), as_matrix(Y), config)
    return float(np.clip(outcome.best_r2, 0.0, 1.0))


def ridge_cv_fit(X, Y, config: Optional[ScoringConfig] = None) -> RegressionResult:
    """Pick lambda by cross-validation, then refit on the full data.

    Predictions are returned in the original target units, so the residual
    invariant R = Y - predictions holds elementwise.
    """
    config = config or ScoringConfig()
    X = as_matrix(X)
    Y = as_matrix(Y)
    outcome = _cv_grid(X, Y, config)
    lam = config.lambda_grid[outcome.best_index]
    xm, xs = _standardize_stats(X)
    ym = Y.mean(axis=0)
    Xs = (X - xm) / xs
    beta = _ridge_solve(Xs, Y - ym, X.shape[0] * lam)
    pred = Xs @ beta + ym
    return RegressionResult(
        coefficients=beta,
        predictions=pred,
        residuals=Y - pred,
        cv_r2=outcome.best_r2,
        chosen_lambda=float(lam),
    )


def conditional_score(X, Y, Z=None, config: Optional[ScoringConfig] = None) -> float:
    """r² of Y on X after removing what Z explains from both sides.

    With empty Z this reduces to cv_score(X, Y).  Otherwise Y ~ Z and
    X ~ Z are fitted with cross-validated ridge, and the score is the
    cross-validated r² between their residuals.
    """
    config = config or ScoringConfig()
    if Z is None or (hasattr(Z, "__len__") and len(Z) == 0):
        return cv_score(X, Y, config)
    ry = ridge_cv_fit(Z, Y, config).residuals
    rx = ridge_cv_fit(Z, X, config).residuals
    return cv_score(rx, ry, config)


# ---------------------------------------------------------------------------
# Random projections
# ---------------------------------------------------------------------------


def random_project(M, d: int, seed) -> np.ndarray:
    """Project T x n data to T x d with an n x d iid standard-normal matrix.

    Pass-through when n <= d.  The same seed always yields the same matrix.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    M = as_matrix(M)
    n = M.shape[1]
    if n <= d:
        return M
    rng = np.random.default_rng(seed)
    P = rng.standard_normal((n, d))
    return M @ P


def _projection_seed(seed: int, sample: int, role: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=(seed & 0xFFFFFFFFFFFFFFFF), spawn_key=(sample, role))


# ---------------------------------------------------------------------------
# Hypothesis dispatch
# ---------------------------------------------------------------------------


def _stack_condition(table: FamilyTable, keys) -> Optional[np.ndarray]:
    if not keys:
        return None
    return np.hstack([table[k].matrix for k in keys])


def _corr_plot(X: np.ndarray, Y: np.ndarray, rho: np.ndarray) -> PlotData:
    # plot the first target output against its best-correlated X column
    i = int(np.argmax(np.abs(rho[:, 0])))
    fit = ols_fit(X[:, [i]], Y[:, [0]])
    return PlotData(observed=Y[:, 0], predicted=fit.predictions[:, 0])


def _l2_score_and_plot(
    X: np.ndarray, Y: np.ndarray, Z: Optional[np.ndarray], config: ScoringConfig
) -> tuple[float, PlotData, float]:
    """Score one (X, Y | Z) instance; returns (raw r², plot, chosen lambda)."""
    if Z is None:
        final_target = Y
    else:
        reg_y = ridge_cv_fit(Z, Y, config)
        final_target = reg_y.residuals
        X = ridge_cv_fit(Z, X, config).residuals
    final = ridge_cv_fit(X, final_target, config)
    plot = PlotData(observed=final_target[:, 0], predicted=final.predictions[:, 0])
    return final.cv_r2, plot, final.chosen_lambda


def score_hypothesis(
    h: Hypothesis, table: FamilyTable, config: Optional[ScoringConfig] = None
) -> ScoreReport:
    """Score a validated hypothesis with the configured method.

    Projection methods project X, Y and Z independently with fresh seeds
    for each of ``proj_samples`` repetitions and average the scores.
    """
    config = config or ScoringConfig()
    t0 = time.perf_counter()
    X = table[h.x].matrix
    Y = table[h.y].matrix
    Z = _stack_condition(table, h.z)
    T = X.shape[0]
    diagnostics: dict[str, float] = {}

    if config.method in (ScoreMethod.CORR_MEAN, ScoreMethod.CORR_MAX):
        # univariate scoring is marginal; with a conditioning set the
        # correlations are taken between ridge residuals instead
        if Z is not None:
            Y = ridge_cv_fit(Z, Y, config).residuals
            X = ridge_cv_fit(Z, X, config).residuals
        rho = pearson_matrix(X, Y)
        a = np.abs(rho)
        score = float(a.mean() if config.method is ScoreMethod.CORR_MEAN else a.max())
        plot = _corr_plot(X, Y, rho)
        p_eff = 2
        p_value = _score_pvalue(score**2, T, p_eff)
        diagnostics["effective_predictors"] = p_eff
    else:
        if config.method is ScoreMethod.L2_PROJ:
            d = config.effective_proj_dim()
            raw_scores = []
            plot = None
            lam = None
            for s in range(config.proj_samples):
                Xp = random_project(X, d, _projection_seed(config.seed, s, 0))
                Yp = random_project(Y, d, _projection_seed(config.seed, s, 1))
                Zp = None if Z is None else random_project(Z, d, _projection_seed(config.seed, s, 2))
                r2, sample_plot, sample_lam = _l2_score_and_plot(Xp, Yp, Zp, config)
                raw_scores.append(np.clip(r2, 0.0, 1.0))
                if s == 0:
                    plot, lam = sample_plot, sample_lam
            score = float(np.mean(raw_scores))
            p_eff = min(X.shape[1], d)
            diagnostics["proj_dim"] = d
            diagnostics["proj_samples"] = config.proj_samples
        else:
            r2, plot, lam = _l2_score_and_plot(X, Y, Z, config)
            score = float(np.clip(r2, 0.0, 1.0))
            p_eff = X.shape[1]
        diagnostics["chosen_lambda"] = float(lam)
        diagnostics["effective_predictors"] = p_eff
        if p_eff >= T:
            p_value = 1.0
            diagnostics["p_value_invalid_regime"] = 1.0
        else:
            p_value = _score_pvalue(score, T, p_eff)

    elapsed_ms = int(round((time.perf_counter() - t0) * 1000))
    return ScoreReport(
        hypothesis=h,
        score=score,
        method=config.method_label(),
        p_value=p_value,
        plot=plot,
        timing_ms=elapsed_ms,
        diagnostics=diagnostics,
    )


def _score_pvalue(s: float, n: int, p: int) -> float:
    """Chebyshev bound on the null probability of a score >= s."""
    if s <= 0.0:
        return 1.0
    p = max(2, p)
    if p >= n:
        return 1.0
    return chebyshev_pvalue(s, n, p)
