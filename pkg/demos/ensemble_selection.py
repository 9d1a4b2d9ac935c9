"""Greedy ensemble selection against the exhaustive optimum.

Builds a pool of noisy, partly correlated predictors for a binary target,
prints the error decomposition of the full pool and then compares the greedy
subset with the best subset found by enumeration.

Run with ``python3 demos/ensemble_selection.py``.
"""

import numpy as np

from ensemble_explorer.ensemble import brute_force_select, ege, greedy_select
from ensemble_explorer.estimators import PredictionVector

rng = np.random.default_rng(0)
n, m = 400, 10
y = rng.integers(0, 2, n).astype(float)

# a shared noise component makes some members agree on their mistakes
shared = rng.normal(size=n)
pool = []
for i in range(m):
    rho = rng.uniform(0.0, 0.9)
    noise = rho * shared + np.sqrt(1 - rho ** 2) * rng.normal(size=n)
    v = np.clip(y + rng.uniform(0.3, 0.6) * noise, 0, 1)
    pool.append(PredictionVector(i, v, float(np.mean((v - y) ** 2)), f"m{i}", {}))

full = ege(pool, y)
print(f"full pool: E={full.E:.5f}  E_bar={full.E_bar:.5f}  A_bar={full.A_bar:.5f}")
print("best single member:", min(p.cv_error for p in pool))

sel = greedy_select(pool, y)
print("greedy trace:", np.round(sel.trace, 5))
print(f"greedy: members {sel.ids}  E={sel.value.E:.5f}")

best = brute_force_select(pool, y)
print(f"brute force: members {best.ids}  E={best.value.E:.5f}")
print(f"gap: {sel.value.E - best.value.E:.2e}")
