"""Scoring-method tests with independent oracles.

Every derived expectation here is computed by a brute-force reference
implementation (dense normal-equation solves, naive two-pass correlation,
explicit population covariances) rather than by the code under test.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causerank.model import Hypothesis, ScoreMethod
from causerank.scoring import (
    DegenerateTarget,
    ScoringConfig,
    conditional_score,
    corr_max,
    corr_mean,
    cv_score,
    ols_residuals,
    pearson_matrix,
    random_project,
    ridge_cv_fit,
    ridge_fit,
    score_hypothesis,
    time_folds,
)
from conftest import make_family
from causerank.model import FamilyTable, TimeIndex


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------


def naive_pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Two-pass covariance implementation of the correlation coefficient."""
    xm = sum(x) / len(x)
    ym = sum(y) / len(y)
    cov = sum((a - xm) * (b - ym) for a, b in zip(x, y))
    vx = sum((a - xm) ** 2 for a in x)
    vy = sum((b - ym) ** 2 for b in y)
    if vx == 0 or vy == 0:
        return 0.0
    return cov / np.sqrt(vx * vy)


def brute_force_ridge(X: np.ndarray, Y: np.ndarray, lam: float) -> np.ndarray:
    """Direct dense solve of (X'X + T lam I) b = X'Y."""
    T, p = X.shape
    return np.linalg.solve(X.T @ X + T * lam * np.eye(p), X.T @ Y)


# ---------------------------------------------------------------------------
# pearson / corr summaries
# ---------------------------------------------------------------------------


def test_pearson_identity_and_negation():
    x = np.array([1.0, 2.0, 3.0])
    assert pearson_matrix(x, x)[0, 0] == pytest.approx(1.0)
    assert pearson_matrix(x, x[::-1].copy())[0, 0] == pytest.approx(-1.0)


def test_pearson_zero_variance_column_yields_zero():
    x = np.array([5.0, 5.0, 5.0])
    y = np.array([1.0, 2.0, 3.0])
    assert pearson_matrix(x, y)[0, 0] == 0.0
    assert pearson_matrix(y, x)[0, 0] == 0.0


def test_pearson_agrees_with_naive_two_pass():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((60, 4))
    Y = rng.standard_normal((60, 3))
    rho = pearson_matrix(X, Y)
    for i in range(4):
        for j in range(3):
            assert rho[i, j] == pytest.approx(naive_pearson(X[:, i], Y[:, j]), abs=1e-12)


def test_corr_summaries_arithmetic():
    # rho = [[0.5, -0.5]] -> mean 0.5, max 0.5; rho = [[1],[0]] -> mean .5, max 1
    t = np.linspace(0, 1, 50)
    y = t - t.mean()
    X = np.column_stack([0.5 * y + np.sqrt(1 - 0.25) * _orthogonal_noise(y, 0)])
    rho = pearson_matrix(X, y)
    assert corr_mean(X, y) == pytest.approx(abs(rho[0, 0]))
    X2 = np.column_stack([y, _orthogonal_noise(y, 1)])
    assert corr_max(X2, y) == pytest.approx(1.0, abs=1e-12)
    assert corr_mean(X2, y) == pytest.approx((1.0 + abs(pearson_matrix(X2[:, 1], y)[0, 0])) / 2)


def _orthogonal_noise(y: np.ndarray, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(len(y))
    e -= e.mean()
    yc = y - y.mean()
    e -= yc * (e @ yc) / (yc @ yc)
    return e


def test_corr_max_matches_brute_force_pairwise_scan():
    # planted y = x3 + noise among 10 features
    rng = np.random.default_rng(42)
    X = rng.standard_normal((500, 10))
    y = X[:, 3] + 0.3 * rng.standard_normal(500)
    best = max(abs(naive_pearson(X[:, i], y)) for i in range(10))
    assert corr_max(X, y) == pytest.approx(best, abs=1e-12)
    assert abs(naive_pearson(X[:, 3], y)) == pytest.approx(best)


# ---------------------------------------------------------------------------
# ridge
# ---------------------------------------------------------------------------


def test_ridge_identity_limit():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((100, 4))
    res = ridge_fit(X, X, lam=1e-12)
    assert np.allclose(res.coefficients, np.eye(4), atol=1e-6)
    assert np.allclose(res.residuals, 0, atol=1e-6)


def test_ridge_penalty_dominance():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((100, 4))
    Y = rng.standard_normal((100, 2))
    X -= X.mean(axis=0)
    Y -= Y.mean(axis=0)
    res = ridge_fit(X, Y, lam=1e12)
    assert np.allclose(res.coefficients, 0, atol=1e-9)
    assert np.allclose(res.predictions, 0, atol=1e-8)
    assert np.allclose(res.residuals, Y)


def test_ridge_matches_brute_force_normal_equations():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((200, 5))
    Y = rng.standard_normal((200, 1))
    res = ridge_fit(X, Y, lam=1.0)
    expected = brute_force_ridge(X, Y, 1.0)
    assert np.max(np.abs(res.coefficients - expected)) < 1e-10
    assert np.allclose(res.residuals, Y - X @ expected, atol=1e-10)


def test_ridge_dual_form_matches_primal():
    # p > T triggers the kernel-form solve; both must agree
    rng = np.random.default_rng(4)
    X = rng.standard_normal((30, 80))
    Y = rng.standard_normal((30, 2))
    res = ridge_fit(X, Y, lam=0.5)
    expected = np.linalg.solve(X.T @ X + 30 * 0.5 * np.eye(80), X.T @ Y)
    assert np.max(np.abs(res.coefficients - expected)) < 1e-8


# ---------------------------------------------------------------------------
# cross-validated scoring
# ---------------------------------------------------------------------------


def test_time_folds_disjoint_contiguous_complete():
    folds = time_folds(103, 5)
    assert len(folds) == 5
    all_idx = np.concatenate(folds)
    assert np.array_equal(all_idx, np.arange(103))  # complete, ordered, disjoint
    for f in folds:
        assert np.array_equal(f, np.arange(f[0], f[-1] + 1))  # contiguous block


def test_time_folds_adapt_downward():
    assert len(time_folds(6, 5)) == 3
    assert len(time_folds(4, 5)) == 2
    with pytest.raises(ValueError):
        time_folds(3, 5)


def test_cv_score_perfect_predictability():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((300, 4))
    beta = np.array([[1.0], [-2.0], [0.5], [3.0]])
    Y = X @ beta
    assert cv_score(X, Y) >= 0.99


def test_cv_score_null_is_near_zero():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        X = rng.standard_normal((1440, 50))
        y = rng.standard_normal(1440)
        assert cv_score(X, y) <= 0.05


def test_cv_score_half_signal():
    # y = x.w + e with var(x.w) = var(e) = 1, so population r² = 0.5
    scores = []
    for seed in range(5):
        rng = np.random.default_rng(100 + seed)
        X = rng.standard_normal((2000, 5))
        w = rng.standard_normal(5)
        w /= np.linalg.norm(w)
        y = X @ w + rng.standard_normal(2000)
        scores.append(cv_score(X, y))
    assert abs(float(np.mean(scores)) - 0.5) < 0.05


def test_cv_score_degenerate_target():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((50, 3))
    with pytest.raises(DegenerateTarget):
        cv_score(X, np.ones(50))


def test_cv_score_multivariate_average():
    rng = np.random.default_rng(7)
    X = rng.standard_normal((1000, 3))
    y_good = X @ np.array([1.0, 1.0, 1.0])  # perfectly predictable
    y_null = rng.standard_normal(1000)  # unpredictable
    s = cv_score(X, np.column_stack([y_good, y_null]))
    assert 0.4 < s < 0.6  # mean of ~1 and ~0


def test_ridge_cv_residual_invariant():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((200, 4))
    Y = X @ rng.standard_normal((4, 2)) + 0.1 * rng.standard_normal((200, 2))
    res = ridge_cv_fit(X, Y)
    assert np.allclose(res.residuals, Y - res.predictions)
    assert res.cv_r2 <= 1.0
    assert res.chosen_lambda in ScoringConfig().lambda_grid


def test_lambda_tie_break_prefers_smaller():
    # an exactly linear, noise-free target gives best score at the smallest lambda
    rng = np.random.default_rng(9)
    X = rng.standard_normal((500, 3))
    Y = X @ np.array([[1.0], [2.0], [-1.0]])
    res = ridge_cv_fit(X, Y)
    assert res.chosen_lambda == ScoringConfig().lambda_grid[0]


# ---------------------------------------------------------------------------
# conditional scoring
# ---------------------------------------------------------------------------


def test_conditional_reduces_to_cv_score_when_z_empty():
    rng = np.random.default_rng(10)
    X = rng.standard_normal((300, 2))
    y = X[:, 0] + 0.5 * rng.standard_normal(300)
    assert conditional_score(X, y, None) == pytest.approx(cv_score(X, y))
    assert conditional_score(X, y, []) == pytest.approx(cv_score(X, y))


def test_conditional_self_target_scores_one():
    rng = np.random.default_rng(11)
    y = rng.standard_normal(400)
    assert conditional_score(y, y, None) >= 0.99


def test_conditional_fully_explained_target_scores_zero():
    # Z predicts Y perfectly, so nothing is left for X to explain
    rng = np.random.default_rng(12)
    z = rng.standard_normal(1000)
    y = 2.0 * z
    x = y + 0.1 * rng.standard_normal(1000)
    assert conditional_score(x, y, z) <= 0.05


def test_conditional_independence_gaussian_triple():
    # x = a z + e_x, y = b z + e_y with independent noises satisfies
    # Sigma_xy = Sigma_xz Sigma_zz^-1 Sigma_zy, i.e. x indep y given z
    for seed in range(3):
        rng = np.random.default_rng(200 + seed)
        z = rng.standard_normal(2000)
        x = 1.5 * z + rng.standard_normal(2000)
        y = -0.8 * z + rng.standard_normal(2000)
        assert conditional_score(x, y, z) <= 0.05


def test_conditional_planted_partial_dependence():
    # y = b z + c e_x + e_y with c var(e_x) = var(e_y) gives partial r² = 0.5
    for seed in range(3):
        rng = np.random.default_rng(300 + seed)
        z = rng.standard_normal(2000)
        e_x = rng.standard_normal(2000)
        x = 1.2 * z + e_x
        y = 0.7 * z + e_x + rng.standard_normal(2000)
        s = conditional_score(x, y, z)
        assert 0.35 <= s <= 0.65


def test_monotone_degeneracy_of_conditioning():
    # conditioning on a perfect predictor of Y cannot beat no conditioning
    rng = np.random.default_rng(13)
    z = rng.standard_normal(800)
    y = 3.0 * z
    x = y + 0.2 * rng.standard_normal(800)
    with_z = conditional_score(x, y, z)
    without = conditional_score(x, y, None)
    assert with_z <= without + 1e-9


# ---------------------------------------------------------------------------
# residual orthogonality (OLS identity)
# ---------------------------------------------------------------------------


def test_residual_orthogonality_identity():
    rng = np.random.default_rng(14)
    for _ in range(10):
        T = 200
        nx, ny, nz = rng.integers(1, 21, size=3)
        X = rng.standard_normal((T, nx))
        Y = rng.standard_normal((T, ny))
        Z = rng.standard_normal((T, nz))
        rx = ols_residuals(X, Z)
        ry = ols_residuals(Y, Z)
        lhs = rx.T @ ry
        rhs = X.T @ Y - (X.T @ Z) @ np.linalg.solve(Z.T @ Z, Z.T @ Y)
        assert np.linalg.norm(lhs - rhs) <= 1e-8 * np.linalg.norm(X.T @ Y)


# ---------------------------------------------------------------------------
# random projection
# ---------------------------------------------------------------------------


def test_random_project_passthrough():
    rng = np.random.default_rng(15)
    M = rng.standard_normal((50, 30))
    out = random_project(M, 50, seed=0)
    assert out is M or np.array_equal(out, M)


def test_random_project_shape_and_determinism():
    rng = np.random.default_rng(16)
    M = rng.standard_normal((40, 100))
    a = random_project(M, 50, seed=123)
    b = random_project(M, 50, seed=123)
    c = random_project(M, 50, seed=124)
    assert a.shape == (40, 50)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


# ---------------------------------------------------------------------------
# dispatch
# ---------------------------------------------------------------------------


def _planted_table(T=600, seed=17):
    rng = np.random.default_rng(seed)
    index = TimeIndex(0, T - 1)
    x = rng.standard_normal((T, 3))
    y = x[:, 0] + 0.4 * rng.standard_normal(T)
    other = rng.standard_normal((T, 2))
    return FamilyTable(
        index,
        [
            make_family("cause", x),
            make_family("target", y[:, None]),
            make_family("other", other),
        ],
    )


def test_score_hypothesis_corrmax_dispatch():
    table = _planted_table()
    h = Hypothesis(x="cause", y="target")
    cfg = ScoringConfig(method=ScoreMethod.CORR_MAX)
    report = score_hypothesis(h, table, cfg)
    assert report.score == pytest.approx(corr_max(table["cause"].matrix, table["target"].matrix))
    assert report.method == "CorrMax"
    assert 0 <= report.p_value <= 1
    assert report.plot is not None and len(report.plot.observed) == 600


def test_score_hypothesis_l2_null_is_low():
    table = _planted_table()
    h = Hypothesis(x="other", y="target")
    cfg = ScoringConfig(method=ScoreMethod.L2)
    assert score_hypothesis(h, table, cfg).score <= 0.05


def test_score_hypothesis_projection_spread_and_mean():
    # factor-structured wide family: projections keep the signal
    rng = np.random.default_rng(18)
    T, F = 400, 800
    f = rng.standard_normal(T)
    load = rng.standard_normal(F)
    X = np.outer(f, load) + 0.5 * rng.standard_normal((T, F))
    y = f + 0.3 * rng.standard_normal(T)
    index = TimeIndex(0, T - 1)
    table = FamilyTable(index, [make_family("wide", X), make_family("target", y[:, None])])
    h = Hypothesis(x="wide", y="target")
    scores = []
    for seed in (1, 2, 3):
        cfg = ScoringConfig(method=ScoreMethod.L2_PROJ, proj_dim=50, seed=seed)
        scores.append(score_hypothesis(h, table, cfg).score)
    assert max(scores) - min(scores) < 0.05
    assert min(scores) > 0.5


def test_score_hypothesis_seed_determinism():
    table = _planted_table()
    h = Hypothesis(x="cause", y="target")
    cfg = ScoringConfig(method=ScoreMethod.L2_PROJ, proj_dim=2, seed=99)
    a = score_hypothesis(h, table, cfg)
    b = score_hypothesis(h, table, cfg)
    assert a.score == b.score and a.p_value == b.p_value


def test_scale_invariance_of_scores():
    table = _planted_table()
    h = Hypothesis(x="cause", y="target")
    scaled = FamilyTable(
        table.index,
        [
            make_family("cause", table["cause"].matrix * 1000.0),
            make_family("target", table["target"].matrix),
            make_family("other", table["other"].matrix),
        ],
    )
    for method in (ScoreMethod.CORR_MEAN, ScoreMethod.CORR_MAX):
        cfg = ScoringConfig(method=method)
        a = score_hypothesis(h, table, cfg).score
        b = score_hypothesis(h, scaled, cfg).score
        assert a == pytest.approx(b, abs=1e-12)
    cfg = ScoringConfig(method=ScoreMethod.L2)
    a = score_hypothesis(h, table, cfg).score
    b = score_hypothesis(h, scaled, cfg).score
    assert a == pytest.approx(b, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=5, max_value=60), st.integers(min_value=2, max_value=8))
def test_time_folds_property(T, k):
    folds = time_folds(T, k)
    assert np.array_equal(np.concatenate(folds), np.arange(T))
    assert all(len(f) >= 1 for f in folds)


def test_scoring_config_validation():
    with pytest.raises(ValueError):
        ScoringConfig(k_folds=1)
    with pytest.raises(ValueError):
        ScoringConfig(lambda_grid=())
    with pytest.raises(ValueError):
        ScoringConfig(lambda_grid=(1.0, 0.5))  # not ascending
    with pytest.raises(ValueError):
        ScoringConfig(lambda_grid=(0.0, 1.0))  # not positive
    with pytest.raises(ValueError):
        ScoringConfig(proj_dim=0)
    with pytest.raises(ValueError):
        ScoringConfig(proj_samples=0)
    cfg = ScoringConfig(method=ScoreMethod.L2_PROJ, proj_dim=500)
    assert cfg.method_label() == "L2-P500"
    assert ScoringConfig(method=ScoreMethod.L2_PROJ).method_label() == "L2-P50"
