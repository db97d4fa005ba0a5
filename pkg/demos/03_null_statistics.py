"""False-positive control: what scores look like when nothing is related.

Samples the r² null at desk scale, compares it with the closed-form Beta
law, shows the Wherry adjustment recentring it at zero, and applies the
Chebyshev p-value with Bonferroni / Benjamini-Hochberg selection.
"""

import numpy as np

from causerank import (
    benjamini_hochberg,
    bonferroni,
    chebyshev_pvalue,
    cv_score,
    null_r2_model,
    wherry_adjust,
)

n, p, trials = 400, 120, 300
rng = np.random.default_rng(0)

r2s = []
for _ in range(trials):
    G = rng.standard_normal((n, p - 1))
    y = rng.standard_normal(n)
    Gc, yc = G - G.mean(0), y - y.mean()
    beta = np.linalg.lstsq(Gc, yc, rcond=None)[0]
    r2s.append(1 - np.sum((yc - Gc @ beta) ** 2) / np.sum(yc**2))
r2s = np.array(r2s)

model = null_r2_model(n, p)
print(f"null r² at (n={n}, p={p}): empirical mean {r2s.mean():.4f} "
      f"vs Beta mean {model.mean:.4f} (variance {model.variance:.2e})")

adj = np.array([wherry_adjust(v, n, p) for v in r2s])
print(f"after the Wherry adjustment: mean {adj.mean():+.4f} (unbiased at 0), "
      f"sd {adj.std():.4f}")

# the cross-validated ridge score behaves like the adjusted r², clamped at 0
cv_null = [cv_score(rng.standard_normal((n, p)), rng.standard_normal(n)) for _ in range(20)]
print(f"cross-validated ridge null scores: mean {np.mean(cv_null):.4f} "
      f"(max {np.max(cv_null):.4f})")

# p-values for a ranking of 30 hypothetical scores, mostly noise-level
scores = sorted(np.abs(rng.normal(0.02, 0.015, size=28)).tolist() + [0.35, 0.18], reverse=True)
pvals = [chebyshev_pvalue(max(s, 1e-6), 1440, 50) for s in scores]
print("\ntop scores with Chebyshev p-values (n=1440, p=50):")
for s, pv in list(zip(scores, pvals))[:5]:
    print(f"  score {s:0.3f} -> p <= {pv:0.2e}")
print(f"Bonferroni keeps {sorted(bonferroni(pvals, 0.05))}")
print(f"Benjamini-Hochberg keeps {sorted(benjamini_hochberg(pvals, 0.05))}")
