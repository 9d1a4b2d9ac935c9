"""Holdout metrics: ROC AUC, RMSE and relative error reduction."""

from __future__ import annotations

import math

import numpy as np
from scipy.stats import rankdata


def auc(scores, labels) -> float:
    """Area under the ROC curve as the normalized Mann-Whitney U statistic.

    Equals the probability that a random positive outscores a random
    negative, with ties counted as one half.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("auc needs both classes present")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def rmse(pred, y) -> float:
    pred = np.asarray(pred, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.sqrt(np.mean((y - pred) ** 2)))


def error_reduction(base_metric: float, opt_metric: float, task: str) -> float:
    """Relative error reduction of an optimized model over a base model.

    For classification the metrics are AUCs and the error is ``1 - AUC``;
    for regression they are RMSEs. Returns NaN when the base error is zero.
    """
    if task == "regression":
        base_err, opt_err = base_metric, opt_metric
    else:
        base_err, opt_err = 1.0 - base_metric, 1.0 - opt_metric
    if base_err <= 0.0:
        return math.nan
    return (base_err - opt_err) / base_err
