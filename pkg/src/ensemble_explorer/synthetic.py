"""Synthetic datasets with planted structure, for demos and end-to-end checks."""

from __future__ import annotations

import numpy as np

from .data import CATEGORICAL, CLASSIFICATION, NUMERIC, REGRESSION, Dataset, FeatureColumn, Target


def _col(name, kind, values):
    return FeatureColumn(name, kind, values, np.zeros(len(values), dtype=bool))


def planted_nonlinearity(n_rows: int = 2000, seed: int = 0, n_latent: int = 6,
                         n_levels: int = 40, noise: float = 0.3, n_distractors: int = 2,
                         task: str = CLASSIFICATION) -> Dataset:
    """Label driven by cube roots of cubed features and a category's frequency.

    ``n_latent`` standard normals ``z_i`` are published only as ``x_i = z_i ** 3``;
    a categorical column draws its levels with Zipf-like probabilities and
    enters the label through how common the level is. The signal is linear in
    ``cbrt(x_i)`` and in the level count, so linear and distance-based models
    gain a lot from the ``cbrt`` and ``freq`` transforms while trees on the raw
    table have to staircase an oblique boundary.
    """
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_rows, n_latent))
    p = 1.0 / np.arange(1, n_levels + 1) ** 1.1
    p /= p.sum()
    levels = np.array([f"L{i:02d}" for i in range(n_levels)], dtype=object)
    cat = rng.choice(n_levels, size=n_rows, p=p)
    count = np.bincount(cat, minlength=n_levels)[cat].astype(float)
    count = (count - count.mean()) / count.std()
    score = z.sum(axis=1) + 0.7 * count + noise * rng.standard_normal(n_rows)
    cols = [_col(f"x{i + 1}", NUMERIC, z[:, i] ** 3) for i in range(n_latent)]
    cols.append(_col("cat", CATEGORICAL, levels[cat]))
    for j in range(n_distractors):
        cols.append(_col(f"noise{j + 1}", NUMERIC, rng.standard_normal(n_rows)))
    if task == CLASSIFICATION:
        target = Target(CLASSIFICATION, (score > 0).astype(np.int64))
    else:
        target = Target(REGRESSION, score)
    return Dataset(cols, target, name="planted_nonlinearity")
