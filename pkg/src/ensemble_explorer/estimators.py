"""Estimator roster, hyper-parameter spaces and out-of-fold prediction.

Tree ensembles are backed by scikit-learn; logistic regression, ridge
regression and k-nearest-neighbours are small numpy implementations. All
randomness comes from :func:`derive_seed`, so a ``(seed, fold)`` pair always
reproduces the same fit.
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit
from sklearn.ensemble import (
    HistGradientBoostingClassifier,
    RandomForestClassifier,
    RandomForestRegressor,
)

from .data import CATEGORICAL, CLASSIFICATION, REGRESSION, Dataset, FoldPlan, Target

CLASSIFIERS = ("random_forest", "gradient_boosted_trees", "logistic_regression", "knn")
REGRESSORS = ("random_forest_reg", "ridge_regression", "knn_reg")
ONE_HOT_MAX_LEVELS = 12


class EstimatorError(ValueError):
    pass


def estimators_for(task: str) -> tuple:
    return CLASSIFIERS if task == CLASSIFICATION else REGRESSORS


def derive_seed(seed: int, *keys) -> int:
    """Child seed for a named sub-stream of ``seed``."""
    words = [int(seed) & 0xFFFFFFFF]
    for k in keys:
        words.append(zlib.crc32(str(k).encode()))
    return int(np.random.SeedSequence(words).generate_state(1)[0])


# -- hyper-parameter spaces -------------------------------------------------

@dataclass(frozen=True)
class Param:
    name: str
    kind: str  # "int", "float" or "choice"
    low: float = 0.0
    high: float = 0.0
    log: bool = False
    choices: tuple = ()

    def contains(self, v) -> bool:
        if self.kind == "choice":
            return v in self.choices
        if self.kind == "int" and (isinstance(v, bool) or int(v) != v):
            return False
        return self.low <= v <= self.high

    def to_unit(self, v) -> float:
        if self.log:
            return (math.log(v) - math.log(self.low)) / (math.log(self.high) - math.log(self.low))
        return (v - self.low) / (self.high - self.low)

    def from_unit(self, u: float):
        u = min(1.0, max(0.0, u))
        if self.log:
            v = math.exp(math.log(self.low) + u * (math.log(self.high) - math.log(self.low)))
        else:
            v = self.low + u * (self.high - self.low)
        if self.kind == "int":
            return int(min(self.high, max(self.low, round(v))))
        return float(min(self.high, max(self.low, v)))

    def to_dict(self) -> dict:
        if self.kind == "choice":
            return {"name": self.name, "kind": self.kind, "choices": list(self.choices)}
        return {"name": self.name, "kind": self.kind, "low": self.low, "high": self.high,
                "log": self.log}


_FOREST = (
    Param("n_trees", "int", 10, 300),
    Param("max_depth", "int", 2, 20),
    Param("min_leaf", "int", 1, 20),
    Param("feature_subsample", "choice", choices=("sqrt", "all", "half")),
)
_KNN = (
    Param("k", "int", 1, 50),
    Param("weighting", "choice", choices=("uniform", "inverse_distance")),
)

SPACES = {
    "random_forest": _FOREST,
    "gradient_boosted_trees": (
        Param("n_rounds", "int", 10, 300),
        Param("learning_rate", "float", 0.01, 0.5, log=True),
        Param("max_depth", "int", 1, 6),
    ),
    "logistic_regression": (
        Param("l2", "float", 1e-6, 10.0, log=True),
        Param("epochs", "int", 50, 500),
    ),
    "knn": _KNN,
    "random_forest_reg": _FOREST,
    "ridge_regression": (Param("l2", "float", 1e-6, 10.0, log=True),),
    "knn_reg": _KNN,
}

_FOREST_DEFAULT = {"n_trees": 100, "max_depth": 12, "min_leaf": 2, "feature_subsample": "sqrt"}
DEFAULTS = {
    "random_forest": _FOREST_DEFAULT,
    "gradient_boosted_trees": {"n_rounds": 100, "learning_rate": 0.1, "max_depth": 3},
    "logistic_regression": {"l2": 1e-3, "epochs": 200},
    "knn": {"k": 5, "weighting": "uniform"},
    "random_forest_reg": _FOREST_DEFAULT,
    "ridge_regression": {"l2": 1.0},
    "knn_reg": {"k": 5, "weighting": "uniform"},
}


def default_hp(id: str) -> dict:
    return dict(DEFAULTS[id])


def validate_hp(id: str, hp: dict) -> dict:
    if id not in SPACES:
        raise EstimatorError(f"unknown estimator {id!r}")
    names = {p.name for p in SPACES[id]}
    if set(hp) != names:
        raise EstimatorError(f"{id}: expected parameters {sorted(names)}, got {sorted(hp)}")
    for p in SPACES[id]:
        if not p.contains(hp[p.name]):
            raise EstimatorError(f"{id}: {p.name}={hp[p.name]!r} outside its space")
    return hp


def hp_key(hp: dict) -> tuple:
    return tuple(sorted(hp.items()))


# -- encoding -----------------------------------------------------------------

@dataclass
class Encoder:
    """Numeric encoding of a Dataset's columns, fitted on training rows.

    Categoricals with at most 12 training levels are one-hot encoded; wider
    ones become their frequency rank (unseen levels get the next rank).
    """

    names: list = field(default_factory=list)
    plans: list = field(default_factory=list)

    @classmethod
    def fit(cls, d: Dataset) -> "Encoder":
        enc = cls(names=d.names)
        for c in d.columns:
            if c.kind != CATEGORICAL:
                enc.plans.append(None)
                continue
            levels, counts = np.unique(c.values.astype(str), return_counts=True)
            order = np.lexsort((levels, -counts))
            ranked = [str(levels[i]) for i in order]
            kind = "onehot" if len(ranked) <= ONE_HOT_MAX_LEVELS else "ordinal"
            enc.plans.append((kind, {lv: r for r, lv in enumerate(ranked)}))
        return enc

    def transform(self, d: Dataset) -> np.ndarray:
        blocks = []
        for name, plan in zip(self.names, self.plans):
            v = d.column(name).values
            if plan is None:
                blocks.append(v.astype(float)[:, None])
                continue
            kind, ranks = plan
            idx = np.array([ranks.get(s, len(ranks)) for s in v.astype(str).tolist()])
            if kind == "ordinal":
                blocks.append(idx.astype(float)[:, None])
            else:
                blocks.append((idx[:, None] == np.arange(len(ranks))[None, :]).astype(float))
        if not blocks:
            return np.zeros((d.n_rows, 0))
        return np.hstack(blocks)


def _standardizer(X: np.ndarray):
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0.0] = 1.0
    return mu, sd


# -- numpy estimators -------------------------------------------------------

class _Logistic:
    step = 0.1

    def __init__(self, l2: float, epochs: int):
        self.l2, self.epochs = l2, epochs

    def fit(self, X, y):
        self.mu, self.sd = _standardizer(X)
        Z = (X - self.mu) / self.sd
        n = len(y)
        w = np.zeros(Z.shape[1])
        b = 0.0
        for _ in range(self.epochs):
            r = expit(Z @ w + b) - y
            w -= self.step * (Z.T @ r / n + self.l2 * w)
            b -= self.step * r.mean()
        self.w, self.b = w, b
        return self

    def predict(self, X):
        return expit(((X - self.mu) / self.sd) @ self.w + self.b)


class _Ridge:
    def __init__(self, l2: float):
        self.l2 = l2

    def fit(self, X, y):
        self.mu, self.sd = _standardizer(X)
        Z = (X - self.mu) / self.sd
        n, p = Z.shape
        self.y0 = float(y.mean())
        A = Z.T @ Z / n + self.l2 * np.eye(p)
        self.w = np.linalg.lstsq(A, Z.T @ (y - self.y0) / n, rcond=None)[0]
        return self

    def predict(self, X):
        return ((X - self.mu) / self.sd) @ self.w + self.y0


class _KNN:
    chunk = 256

    def __init__(self, k: int, weighting: str):
        self.k, self.weighting = k, weighting

    def fit(self, X, y):
        self.mu, self.sd = _standardizer(X)
        self.Z = (X - self.mu) / self.sd
        self.y = y.astype(float)
        return self

    def predict(self, X):
        Q = (X - self.mu) / self.sd
        k = min(self.k, len(self.y))
        out = np.empty(len(Q))
        sq = (self.Z ** 2).sum(axis=1)
        for s in range(0, len(Q), self.chunk):
            q = Q[s:s + self.chunk]
            d2 = (q ** 2).sum(axis=1)[:, None] + sq[None, :] - 2.0 * q @ self.Z.T
            dist = np.sqrt(np.maximum(d2, 0.0))
            nn = np.argsort(dist, axis=1, kind="stable")[:, :k]
            labels = self.y[nn]
            if self.weighting == "uniform":
                out[s:s + self.chunk] = labels.mean(axis=1)
            else:
                w = 1.0 / (np.take_along_axis(dist, nn, axis=1) + 1e-12)
                out[s:s + self.chunk] = (w * labels).sum(axis=1) / w.sum(axis=1)
        return out


_MAX_FEATURES = {"sqrt": "sqrt", "all": None, "half": 0.5}


def _build(id: str, hp: dict, seed: int):
    if id in ("random_forest", "random_forest_reg"):
        cls = RandomForestClassifier if id == "random_forest" else RandomForestRegressor
        return cls(n_estimators=hp["n_trees"], max_depth=hp["max_depth"],
                   min_samples_leaf=hp["min_leaf"],
                   max_features=_MAX_FEATURES[hp["feature_subsample"]],
                   random_state=seed, n_jobs=1)
    if id == "gradient_boosted_trees":
        # histogram-binned boosting: same logistic-loss trees, several times faster
        return HistGradientBoostingClassifier(max_iter=hp["n_rounds"],
                                              learning_rate=hp["learning_rate"],
                                              max_depth=hp["max_depth"], max_leaf_nodes=None,
                                              min_samples_leaf=1, early_stopping=False,
                                              random_state=seed)
    if id == "logistic_regression":
        return _Logistic(hp["l2"], hp["epochs"])
    if id == "ridge_regression":
        return _Ridge(hp["l2"])
    if id in ("knn", "knn_reg"):
        return _KNN(hp["k"], hp["weighting"])
    raise EstimatorError(f"unknown estimator {id!r}")


@dataclass
class FittedModel:
    estimator: str
    hyperparams: dict
    model: object
    encoder: Encoder | None = None

    def predict(self, X) -> np.ndarray:
        """Positive-class probability (classifiers) or predicted value (regressors)."""
        if isinstance(X, Dataset):
            X = self.encoder.transform(X)
        if hasattr(self.model, "predict_proba"):
            return self.model.predict_proba(X)[:, 1]
        return np.asarray(self.model.predict(X), dtype=float)


def fit(id: str, hp: dict, X, y, seed: int = 0) -> FittedModel:
    """Fit estimator ``id`` on a feature block (array or Dataset) and target."""
    validate_hp(id, hp)
    encoder = None
    if isinstance(X, Dataset):
        encoder = Encoder.fit(X)
        X = encoder.transform(X)
    task = None
    if isinstance(y, Target):
        task, y = y.task, y.values
    task = task or (CLASSIFICATION if id in CLASSIFIERS else REGRESSION)
    if (task == CLASSIFICATION) != (id in CLASSIFIERS):
        raise EstimatorError(f"estimator {id!r} does not handle task {task!r}")
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] == 0 or X.shape[0] == 0:
        raise EstimatorError("empty feature block")
    y = np.asarray(y, dtype=float)
    if task == CLASSIFICATION and len(np.unique(y)) < 2:
        raise EstimatorError("training target has a single class")
    model = _build(id, hp, seed).fit(X, y if task == REGRESSION else y.astype(int))
    return FittedModel(id, dict(hp), model, encoder)


@dataclass(eq=False)
class PredictionVector:
    node_id: int
    values: np.ndarray
    cv_error: float
    estimator: str
    hyperparams: dict


def cv_predict(id: str, hp: dict, d: Dataset, folds: FoldPlan, seed: int = 0,
               node_id: int = -1) -> PredictionVector:
    """Out-of-fold predictions: each fold is predicted by a model fitted on the others."""
    if folds.n_rows != d.n_rows:
        raise EstimatorError("fold plan does not match dataset rows")
    values = np.full(d.n_rows, np.nan)
    for f in range(folds.k):
        train, test = folds.split(f)
        model = fit(id, hp, d.take(train), d.target.take(train), derive_seed(seed, "fold", f))
        values[test] = model.predict(d.take(test))
    y = d.target.values.astype(float)
    return PredictionVector(node_id, values, float(np.mean((y - values) ** 2)), id, dict(hp))
