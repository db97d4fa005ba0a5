"""Null-distribution theory for r² scores and multiple-testing control.

Under the null (no dependence, iid normal data, OLS with p predictors and n
points) the training r² is Beta((p-1)/2, (n-p)/2) with mean (p-1)/(n-1).
Wherry's adjustment recentres it at zero, and Chebyshev's inequality turns
its variance into a conservative p-value for an observed score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .model import CauseRankError


class DomainError(CauseRankError):
    pass


@dataclass(frozen=True)
class NullModel:
    """Beta null of the OLS r² for n data points and p predictors."""

    n: int
    p: int
    a: float
    b: float
    mean: float
    variance: float

    def distribution(self):
        """Frozen scipy distribution, e.g. for KS tests against samples."""
        return sps.beta(self.a, self.b)


def null_r2_model(n: int, p: int) -> NullModel:
    """r² ~ Beta((p-1)/2, (n-p)/2); requires 1 < p < n."""
    if not (1 < p < n):
        raise DomainError(f"need 1 < p < n, got n={n}, p={p}")
    mean = (p - 1) / (n - 1)
    variance = mean * (1 - mean) / (1 + (n - 1) / 2)
    return NullModel(n=n, p=p, a=(p - 1) / 2, b=(n - p) / 2, mean=mean, variance=variance)


def wherry_adjust(r2: float, n: int, p: int) -> float:
    """r²_adj = 1 - (1 - r²) (n-1)/(n-p); may be negative."""
    if p >= n:
        raise DomainError(f"need p < n, got n={n}, p={p}")
    return 1.0 - (1.0 - r2) * (n - 1) / (n - p)


def adj_null_mean(n: int, p: int) -> float:
    """The adjusted r² is unbiased at zero under the null."""
    if p >= n:
        raise DomainError(f"need p < n, got n={n}, p={p}")
    return 0.0


def adj_null_variance(n: int, p: int) -> float:
    """var[r²_adj] = (2 (p-1)/(n-p)) * (1/(n+1)) under the null."""
    if p >= n:
        raise DomainError(f"need p < n, got n={n}, p={p}")
    return (2.0 * (p - 1) / (n - p)) * (1.0 / (n + 1))


def chebyshev_pvalue(s: float, n: int, p: int) -> float:
    """Upper bound on P(r²_adj >= s) under the null, clamped to <= 1.

    The variance here uses the (n-1) form, matching the worked p-value
    approximation of ~4.9e-5 / s² at n=1440, p=50.
    """
    if s <= 0:
        raise DomainError(f"score must be > 0, got {s}")
    if p >= n:
        raise DomainError(f"need p < n, got n={n}, p={p}")
    var = 2.0 * (p - 1) / ((n - p) * (n - 1))
    return float(min(1.0, var / (s * s)))


def bonferroni(pvals, alpha: float = 0.05) -> set[int]:
    """Indices rejected at family-wise level alpha: p_i <= alpha / k."""
    pvals = np.asarray(pvals, dtype=np.float64)
    _check_pvals(pvals)
    k = len(pvals)
    if k == 0:
        return set()
    return set(np.flatnonzero(pvals <= alpha / k).tolist())


def benjamini_hochberg(pvals, alpha: float = 0.05) -> set[int]:
    """Step-up FDR control: reject the i smallest p-values where
    p_(i) <= i * alpha / k for the largest such i."""
    pvals = np.asarray(pvals, dtype=np.float64)
    _check_pvals(pvals)
    k = len(pvals)
    if k == 0:
        return set()
    order = np.argsort(pvals, kind="stable")
    thresholds = (np.arange(1, k + 1) * alpha) / k
    passing = np.flatnonzero(pvals[order] <= thresholds)
    if len(passing) == 0:
        return set()
    cutoff = passing[-1] + 1
    return set(order[:cutoff].tolist())


def _check_pvals(pvals: np.ndarray) -> None:
    if len(pvals) and (np.any(pvals < 0) or np.any(pvals > 1) or not np.all(np.isfinite(pvals))):
        raise DomainError("p-values must lie in [0, 1]")


def ridge_effective_df(eigenvalues, lam: float, n: int) -> float:
    """Effective degrees of freedom of ridge at penalty lam.

    df = sum_j ( 2 d_j²/(d_j²+lam) - 1/n - (d_j²/(d_j²+lam))² )

    where d_j² are the eigenvalues of X'X.  Monotonically non-increasing
    in lam; at lam=0 each positive-eigenvalue term is 1 - 1/n.
    """
    e = np.asarray(eigenvalues, dtype=np.float64)
    if np.any(e < 0) or lam < 0 or n < 1:
        raise DomainError("need eigenvalues >= 0, lam >= 0, n >= 1")
    denom = e + lam
    ratio = np.divide(e, denom, out=np.zeros_like(e), where=denom > 0)
    return float(np.sum(2.0 * ratio - 1.0 / n - ratio**2))
