"""Feature transformation catalog.

Every transform except ``feature_selection`` appends new numeric columns named
``<source>~<transform>`` to the input table. Parameters are fitted on the
training rows only and captured in a :class:`TransformSpec`, which
:func:`replay` uses to rebuild the same columns on unseen rows.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from .data import CATEGORICAL, NUMERIC, DataError, Dataset, FeatureColumn

TRANSFORMS = (
    "freq",
    "pca",
    "round",
    "minmaxscaler",
    "tanh",
    "groupby_stddev",
    "cbrt",
    "sigmoid",
    "stdscaler",
    "feature_selection",
)

UNARY = ("round", "minmaxscaler", "tanh", "cbrt", "sigmoid", "stdscaler")


@dataclass(frozen=True)
class TransformConfig:
    pca_k: int = 4
    freq_distinct_cap: int = 20
    groupby_pair_cap: int = 8
    groupby_key_cap: int = 50
    selection_keep_fraction: float = 0.5


@dataclass(frozen=True)
class ColumnRecipe:
    """How one generated column is computed from its sources."""

    name: str
    sources: tuple
    params: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class TransformSpec:
    id: str
    recipes: tuple = ()
    kept: tuple | None = None
    noop: bool = False

    @property
    def output_names(self) -> list:
        if self.kept is not None:
            return list(self.kept)
        return [r.name for r in self.recipes]

    def to_dict(self) -> dict:
        """Plain-data view of the spec, fitted parameters included."""
        return {
            "id": self.id,
            "noop": self.noop,
            "kept": list(self.kept) if self.kept is not None else None,
            "columns": [
                {"name": r.name, "sources": list(r.sources),
                 "params": {k: _plain(v) for k, v in sorted(r.params.items())}}
                for r in self.recipes
            ],
        }


def _plain(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, dict):
        return [[k, _plain(x)] for k, x in sorted(v.items(), key=lambda kv: repr(kv[0]))]
    if isinstance(v, np.generic):
        return v.item()
    return v


def _is_integral(x: np.ndarray) -> bool:
    return bool(np.all(np.equal(np.floor(x), x)))


def _freq_sources(d: Dataset, rows, cap: int) -> list:
    out = []
    for c in d.columns:
        if c.kind == CATEGORICAL:
            out.append(c)
        elif c.kind == NUMERIC:
            v = c.values[rows]
            if _is_integral(v) and len(np.unique(v)) <= cap:
                out.append(c)
    return out


def applicable(d: Dataset, id: str, config: TransformConfig | None = None) -> bool:
    """Whether ``id`` has at least one valid input column (or column pair) in ``d``."""
    config = config or TransformConfig()
    n_num = len(d.of_kind(NUMERIC))
    n_cat = len(d.of_kind(CATEGORICAL))
    if id == "freq":
        return bool(_freq_sources(d, slice(None), config.freq_distinct_cap))
    if id == "pca":
        return n_num >= 2
    if id in UNARY:
        return n_num >= 1
    if id == "groupby_stddev":
        return n_cat >= 1 and n_num >= 1
    if id == "feature_selection":
        return len(d.columns) >= 2
    raise ValueError(f"unknown transform {id!r}")


# -- elementwise ----------------------------------------------------------

def _apply_unary(id: str, x: np.ndarray, params: dict) -> np.ndarray:
    if id == "round":
        return np.rint(x)
    if id == "minmaxscaler":
        return (x - params["min"]) / (params["max"] - params["min"])
    if id == "stdscaler":
        return (x - params["mean"]) / params["std"]
    if id == "tanh":
        return np.tanh(x)
    if id == "sigmoid":
        return expit(x)
    if id == "cbrt":
        return np.cbrt(x)
    raise ValueError(id)


def _fit_unary(id: str, x: np.ndarray):
    """Fitted params for one column, or None when the fit is degenerate."""
    if id == "minmaxscaler":
        lo, hi = float(x.min()), float(x.max())
        return None if hi == lo else {"min": lo, "max": hi}
    if id == "stdscaler":
        mu, sd = float(x.mean()), float(x.std())
        return None if sd == 0.0 else {"mean": mu, "std": sd}
    if id == "round":
        # rounding an integer column would just copy it
        return None if _is_integral(x) else {}
    return {}


def _recipes_unary(d, id, rows, config):
    recipes = []
    for c in d.of_kind(NUMERIC):
        params = _fit_unary(id, c.values[rows])
        if params is not None:
            recipes.append(ColumnRecipe(f"{c.name}~{id}", (c.name,), params))
    return recipes


# -- frequency / group statistics -----------------------------------------

def _recipes_freq(d, id, rows, config):
    recipes = []
    for c in _freq_sources(d, rows, config.freq_distinct_cap):
        keys, counts = np.unique(c.values[rows], return_counts=True)
        table = {k: float(n) for k, n in zip(keys.tolist(), counts)}
        recipes.append(ColumnRecipe(f"{c.name}~freq", (c.name,), {"table": table}))
    return recipes


def _lookup(values: np.ndarray, table: dict, default: float = 0.0) -> np.ndarray:
    return np.array([table.get(v, default) for v in values.tolist()], dtype=float)


def _group_std(keys: np.ndarray, values: np.ndarray) -> dict:
    table = {}
    for k in np.unique(keys).tolist():
        v = values[keys == k]
        table[k] = float(v.std(ddof=1)) if len(v) > 1 else 0.0
    return table


def _recipes_groupby(d, id, rows, config):
    scored = []
    for key in d.of_kind(CATEGORICAL):
        k_train = key.values[rows]
        card = len(np.unique(k_train))
        if card < 2 or card > config.groupby_key_cap:
            continue
        for val in d.of_kind(NUMERIC):
            table = _group_std(k_train, val.values[rows])
            out = _lookup(k_train, table)
            spread = float(out.var())
            if spread > 0.0:
                name = f"{val.name}|{key.name}~groupby_stddev"
                scored.append((spread, ColumnRecipe(name, (key.name, val.name), {"table": table})))
    scored.sort(key=lambda s: -s[0])  # stable: ties keep column order
    return [r for _, r in scored[: config.groupby_pair_cap]]


# -- pca ------------------------------------------------------------------

def principal_axes(cov: np.ndarray, k: int, tol: float = 1e-12, max_iter: int = 5000):
    """Top-``k`` eigenvectors of a symmetric PSD matrix by power iteration with deflation.

    Each iterate is re-orthogonalised against the axes already found. Stops
    early when the remaining spectrum is numerically zero.
    """
    p = cov.shape[0]
    c = cov.copy()
    axes, values = [], []
    rng = np.random.default_rng(0)
    scale = max(float(np.trace(cov)), 1e-300)
    for _ in range(min(k, p)):
        v = rng.standard_normal(p)
        for _it in range(max_iter):
            w = c @ v
            for a in axes:
                w -= (a @ w) * a
            norm = np.linalg.norm(w)
            if norm == 0.0:
                break
            w /= norm
            done = np.linalg.norm(w - v) < tol
            v = w
            if done:
                break
        lam = float(v @ cov @ v)
        if not np.isfinite(lam) or lam <= 1e-10 * scale:
            break
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        axes.append(v)
        values.append(lam)
        c = c - lam * np.outer(v, v)
    return np.array(axes).reshape(len(axes), p), np.array(values)


def _recipes_pca(d, id, rows, config):
    cols = []
    for c in d.of_kind(NUMERIC):
        x = c.values[rows]
        if x.std() > 0.0:
            cols.append(c)
    if len(cols) < 2:
        return []
    block = np.column_stack([c.values[rows] for c in cols])
    mean, std = block.mean(axis=0), block.std(axis=0)
    z = (block - mean) / std
    cov = z.T @ z / len(z)
    axes, _ = principal_axes(cov, min(config.pca_k, len(cols)))
    if len(axes) == 0:
        return []
    sources = tuple(c.name for c in cols)
    params = {"mean": mean, "std": std, "axes": axes}
    names = set(d.names)
    recipes = []
    for j in range(len(axes)):
        name = _unique(f"pc{j + 1}~pca", names)
        names.add(name)
        recipes.append(ColumnRecipe(name, sources, {**params, "component": j}))
    return recipes


def _unique(base: str, taken: set) -> str:
    if base not in taken:
        return base
    i = 2
    while f"{base}#{i}" in taken:
        i += 1
    return f"{base}#{i}"


# -- feature selection ----------------------------------------------------

def _relevance(col: FeatureColumn, y: np.ndarray) -> float:
    """Absolute correlation with the target; categoricals use their per-level target means."""
    if col.kind == CATEGORICAL:
        means = {}
        for k in np.unique(col.values).tolist():
            means[k] = float(y[col.values == k].mean())
        x = _lookup(col.values, means)
    else:
        x = col.values.astype(float)
    if x.std() == 0.0 or y.std() == 0.0:
        return 0.0
    return abs(float(np.corrcoef(x, y)[0, 1]))


def _fit_selection(d: Dataset, rows, config) -> tuple:
    y = d.target.values[rows].astype(float)
    scores = [_relevance(c.take(rows), y) for c in d.columns]
    keep = max(1, int(len(d.columns) * config.selection_keep_fraction))
    order = np.argsort(-np.array(scores), kind="stable")[:keep]
    return tuple(d.columns[i].name for i in sorted(order))


# -- fit / replay ---------------------------------------------------------

_RECIPE_BUILDERS: dict[str, Callable] = {
    "freq": _recipes_freq,
    "pca": _recipes_pca,
    "groupby_stddev": _recipes_groupby,
    **{u: _recipes_unary for u in UNARY},
}


def _compute(id: str, recipe: ColumnRecipe, d: Dataset) -> np.ndarray:
    try:
        src = [d.column(s).values for s in recipe.sources]
    except DataError as exc:
        raise DataError(f"cannot replay {recipe.name!r}: {exc}") from None
    p = recipe.params
    if id in UNARY:
        return _apply_unary(id, src[0].astype(float), p)
    if id == "freq":
        return _lookup(src[0], p["table"])
    if id == "groupby_stddev":
        return _lookup(src[0], p["table"])
    if id == "pca":
        z = (np.column_stack(src).astype(float) - p["mean"]) / p["std"]
        return z @ p["axes"][p["component"]]
    raise ValueError(id)


def _materialise(id: str, recipes, d: Dataset) -> Dataset:
    new = []
    for r in recipes:
        parents = [d.column(s).lineage for s in r.sources]
        lineage = max(parents, key=len) + ((id, r.sources),)
        values = _compute(id, r, d)
        new.append(FeatureColumn(r.name, NUMERIC, values, np.zeros(d.n_rows, dtype=bool), lineage))
    return d.with_columns(d.columns + tuple(new))


def fit_apply(d: Dataset, id: str, train_mask=None, config: TransformConfig | None = None):
    """Fit transform ``id`` on the training rows of ``d`` and apply it to every row.

    Returns ``(out, spec)``. Columns whose fit is degenerate are skipped, as
    are outputs whose name already exists in ``d``; if nothing is left, ``out``
    is ``d`` itself and ``spec.noop`` is set.
    """
    if id not in TRANSFORMS:
        raise ValueError(f"unknown transform {id!r}")
    config = config or TransformConfig()
    rows = np.ones(d.n_rows, dtype=bool) if train_mask is None else np.asarray(train_mask, dtype=bool)
    if not rows.any():
        raise DataError("train_mask selects no rows")
    if not applicable(d, id, config):
        raise DataError(f"transform {id!r} is not applicable to {d.name!r}")

    if id == "feature_selection":
        kept = _fit_selection(d, rows, config)
        if len(kept) == len(d.columns):
            return d, TransformSpec(id, noop=True)
        spec = TransformSpec(id, kept=kept)
        return replay(spec, d), spec

    taken = set(d.names)
    recipes = tuple(r for r in _RECIPE_BUILDERS[id](d, id, rows, config) if r.name not in taken)
    if not recipes:
        return d, TransformSpec(id, noop=True)
    spec = TransformSpec(id, recipes)
    return _materialise(id, recipes, d), spec


def replay(spec: TransformSpec, d: Dataset) -> Dataset:
    """Rebuild the columns described by ``spec`` on ``d`` using fitted parameters only."""
    if spec.noop:
        return d
    if spec.kept is not None:
        return d.with_columns([d.column(n) for n in spec.kept])
    return _materialise(spec.id, spec.recipes, d)


def replay_chain(specs, d: Dataset) -> Dataset:
    for s in specs:
        d = replay(s, d)
    return d
