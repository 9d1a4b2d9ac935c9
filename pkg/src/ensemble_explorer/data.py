"""Tabular datasets: typed CSV ingestion, holdout splitting and k-fold plans."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

NUMERIC = "numeric"
CATEGORICAL = "categorical"
DATETIME = "datetime"
KINDS = (NUMERIC, CATEGORICAL, DATETIME)

CLASSIFICATION = "binary_classification"
REGRESSION = "regression"
TASKS = (CLASSIFICATION, REGRESSION)

MISSING_TOKEN = "⟂missing⟂"
MISSING_CELLS = frozenset({"", "NA", "?"})

DATETIME_PARTS = ("year", "month", "dow", "hour")


class DataError(ValueError):
    """Raised for malformed input data or invalid split requests."""


@dataclass(frozen=True, eq=False)
class FeatureColumn:
    name: str
    kind: str
    values: np.ndarray
    missing_mask: np.ndarray
    lineage: tuple = ()

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DataError(f"unknown column kind {self.kind!r}")
        if len(self.values) != len(self.missing_mask):
            raise DataError(f"column {self.name!r}: values and mask lengths differ")
        if self.kind == NUMERIC:
            ok = np.isfinite(self.values[~self.missing_mask])
            if not ok.all():
                raise DataError(f"column {self.name!r}: non-finite numeric cell")

    def __len__(self):
        return len(self.values)

    @property
    def depth(self) -> int:
        return len(self.lineage)

    def take(self, rows) -> "FeatureColumn":
        return replace(self, values=self.values[rows], missing_mask=self.missing_mask[rows])


@dataclass(frozen=True, eq=False)
class Target:
    task: str
    values: np.ndarray
    name: str = "y"

    def __post_init__(self):
        if self.task not in TASKS:
            raise DataError(f"unknown task {self.task!r}")
        if self.task == CLASSIFICATION:
            if not np.isin(self.values, (0, 1)).all():
                raise DataError("binary classification target must be 0/1")
        elif not np.isfinite(self.values).all():
            raise DataError("regression target must be finite")

    def __len__(self):
        return len(self.values)

    @property
    def is_classification(self) -> bool:
        return self.task == CLASSIFICATION

    def take(self, rows) -> "Target":
        return replace(self, values=self.values[rows])


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-major feature table plus target vector.

    Datasets are treated as immutable; every operation returns a new one.
    ``has_datetime`` survives datetime expansion so downstream consumers can
    still tell the source table contained dates.
    """

    columns: tuple
    target: Target
    name: str = "dataset"
    has_datetime: bool = False
    _index: dict = field(default=None, init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        n = len(self.target)
        index = {}
        for i, col in enumerate(self.columns):
            if len(col) != n:
                raise DataError(f"column {col.name!r} has {len(col)} rows, target has {n}")
            if col.name in index:
                raise DataError(f"duplicate column name {col.name!r}")
            index[col.name] = i
        object.__setattr__(self, "_index", index)

    @property
    def n_rows(self) -> int:
        return len(self.target)

    @property
    def names(self) -> list:
        return [c.name for c in self.columns]

    @property
    def task(self) -> str:
        return self.target.task

    def __contains__(self, name):
        return name in self._index

    def column(self, name: str) -> FeatureColumn:
        try:
            return self.columns[self._index[name]]
        except KeyError:
            raise DataError(f"no column named {name!r}") from None

    def of_kind(self, kind: str) -> list:
        return [c for c in self.columns if c.kind == kind]

    def take(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        return replace(self, columns=[c.take(rows) for c in self.columns],
                       target=self.target.take(rows))

    def with_columns(self, columns) -> "Dataset":
        return replace(self, columns=tuple(columns))


@dataclass(frozen=True, eq=False)
class FoldPlan:
    k: int
    assignment: np.ndarray

    def __post_init__(self):
        sizes = np.bincount(self.assignment, minlength=self.k)
        if len(sizes) != self.k or sizes.min() == 0:
            raise DataError("every fold must be non-empty")

    @property
    def n_rows(self) -> int:
        return len(self.assignment)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def split(self, fold: int):
        """Return ``(train_rows, test_rows)`` index arrays for one fold."""
        test = self.assignment == fold
        return np.flatnonzero(~test), np.flatnonzero(test)


# -- CSV ------------------------------------------------------------------

def _parse_float(cell: str):
    try:
        v = float(cell)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def _parse_datetime(cell: str):
    try:
        return datetime.fromisoformat(cell)
    except ValueError:
        return None


def _infer_kind(cells: Sequence[str], missing: np.ndarray) -> str:
    present = [c for c, m in zip(cells, missing) if not m]
    if not present:
        return CATEGORICAL
    if all(_parse_float(c) is not None for c in present):
        return NUMERIC
    if all(_parse_datetime(c) is not None for c in present):
        return DATETIME
    return CATEGORICAL


def _numeric_column(name, cells, missing, lineage=()):
    values = np.zeros(len(cells))
    for i, (c, m) in enumerate(zip(cells, missing)):
        if m:
            continue
        v = _parse_float(c)
        if v is None:
            raise DataError(f"column {name!r}: cell {c!r} is not numeric")
        values[i] = v
    return impute(FeatureColumn(name, NUMERIC, values, missing, lineage))


def impute(col: FeatureColumn) -> FeatureColumn:
    """Fill missing cells: column median for numerics, a sentinel token for categoricals."""
    if not col.missing_mask.any():
        return col
    values = col.values.copy()
    if col.kind == NUMERIC:
        present = values[~col.missing_mask]
        values[col.missing_mask] = float(np.median(present)) if len(present) else 0.0
    else:
        values[col.missing_mask] = MISSING_TOKEN
    return replace(col, values=values)


def expand_datetime(name, cells, missing) -> list:
    """Split a datetime column into numeric year / month / day-of-week / hour columns."""
    parts = {p: np.zeros(len(cells)) for p in DATETIME_PARTS}
    for i, (c, m) in enumerate(zip(cells, missing)):
        if m:
            continue
        ts = _parse_datetime(c)
        if ts is None:
            raise DataError(f"column {name!r}: cell {c!r} is not ISO-8601")
        parts["year"][i] = ts.year
        parts["month"][i] = ts.month
        parts["dow"][i] = ts.weekday()
        parts["hour"][i] = ts.hour
    return [impute(FeatureColumn(f"{name}~{p}", NUMERIC, v, missing.copy()))
            for p, v in parts.items()]


def load_csv(path, target_name: str, declared_kinds: Mapping[str, str] | None = None,
             task: str | None = None, name: str | None = None) -> Dataset:
    """Read a headed CSV file into a :class:`Dataset`.

    Column kinds come from ``declared_kinds`` where given, otherwise they are
    inferred: all cells numeric gives ``numeric``, all cells ISO-8601 gives
    ``datetime``, anything else is ``categorical``. The cells ``""``, ``"NA"``
    and ``"?"`` are treated as missing and imputed. ``task`` is inferred from
    the target when omitted (only 0/1 values means binary classification).
    """
    declared_kinds = dict(declared_kinds or {})
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: no header row")
    header, body = rows[0], [r for r in rows[1:] if r]
    if target_name not in header:
        raise DataError(f"{path}: missing target column {target_name!r}")
    if not body:
        raise DataError(f"{path}: zero data rows")
    for r in body:
        if len(r) != len(header):
            raise DataError(f"{path}: ragged row {r!r}")
    unknown = set(declared_kinds) - set(header)
    if unknown:
        raise DataError(f"declared kinds for unknown columns: {sorted(unknown)}")

    by_col = list(zip(*body))
    t_idx = header.index(target_name)
    target = _parse_target(by_col[t_idx], target_name, task)

    columns = []
    has_datetime = False
    for j, col_name in enumerate(header):
        if j == t_idx:
            continue
        cells = [c.strip() for c in by_col[j]]
        missing = np.array([c in MISSING_CELLS for c in cells])
        kind = declared_kinds.get(col_name) or _infer_kind(cells, missing)
        if kind == NUMERIC:
            columns.append(_numeric_column(col_name, cells, missing))
        elif kind == DATETIME:
            has_datetime = True
            columns.extend(expand_datetime(col_name, cells, missing))
        elif kind == CATEGORICAL:
            values = np.array(cells, dtype=object)
            columns.append(impute(FeatureColumn(col_name, CATEGORICAL, values, missing)))
        else:
            raise DataError(f"unknown kind {kind!r} for column {col_name!r}")
    return Dataset(columns, target, name=name or path.stem, has_datetime=has_datetime)


def _parse_target(cells, target_name, task) -> Target:
    values = []
    for c in cells:
        v = _parse_float(c.strip())
        if v is None:
            raise DataError(f"target {target_name!r}: unparseable cell {c!r}")
        values.append(v)
    values = np.array(values)
    if task is None:
        task = CLASSIFICATION if np.isin(values, (0.0, 1.0)).all() else REGRESSION
    if task == CLASSIFICATION:
        if not np.isin(values, (0.0, 1.0)).all():
            raise DataError(f"target {target_name!r}: classification labels must be 0/1")
        values = values.astype(np.int64)
    return Target(task, values, target_name)


def _format_cell(col: FeatureColumn, i: int) -> str:
    if col.missing_mask[i]:
        return ""
    v = col.values[i]
    return repr(float(v)) if col.kind == NUMERIC else str(v)


def write_csv(d: Dataset, path) -> None:
    """Write ``d`` as CSV; missing cells are written empty so a reload re-imputes them."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(d.names + [d.target.name])
        tv = d.target.values
        for i in range(d.n_rows):
            t = str(int(tv[i])) if d.target.is_classification else repr(float(tv[i]))
            w.writerow([_format_cell(c, i) for c in d.columns] + [t])


def column_kinds(d: Dataset) -> dict:
    return {c.name: c.kind for c in d.columns}


# -- splitting ------------------------------------------------------------

def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _allocate(total: int, weights: np.ndarray) -> np.ndarray:
    """Largest-remainder integer allocation of ``total`` proportional to ``weights``."""
    exact = total * weights / weights.sum()
    base = np.floor(exact).astype(int)
    order = np.argsort(-(exact - base), kind="stable")
    base[order[: total - base.sum()]] += 1
    return base


def holdout_indices(d: Dataset, fraction: float, seed: int):
    if not 0.0 < fraction < 1.0:
        raise DataError("holdout fraction must lie in (0, 1)")
    if d.n_rows < 10:
        raise DataError("holdout split needs at least 10 rows")
    n_test = _round_half_up(fraction * d.n_rows)
    rng = np.random.default_rng(seed)
    if d.target.is_classification:
        y = d.target.values
        groups = [np.flatnonzero(y == c) for c in (0, 1)]
        counts = _allocate(n_test, np.array([len(g) for g in groups], dtype=float))
        test = []
        for g, c in zip(groups, counts):
            if c >= len(g):
                raise DataError("holdout split would leave a class empty in train")
            test.append(rng.permutation(g)[:c])
        test = np.concatenate(test)
    else:
        test = rng.permutation(d.n_rows)[:n_test]
    is_test = np.zeros(d.n_rows, dtype=bool)
    is_test[test] = True
    return np.flatnonzero(~is_test), np.flatnonzero(is_test)


def holdout_split(d: Dataset, fraction: float = 0.33, seed: int = 1):
    """Split into ``(train, test)`` with ``round(fraction * n_rows)`` test rows.

    Classification splits are stratified. Row order within each part follows
    the original table.
    """
    train, test = holdout_indices(d, fraction, seed)
    return d.take(train), d.take(test)


def make_folds(d: Dataset, k: int = 5, seed: int = 0) -> FoldPlan:
    """Assign each row to one of ``k`` folds; stratified for classification.

    Rows are shuffled within each class, the classes are laid end to end and
    dealt round-robin, so fold sizes and per-fold class counts both differ by
    at most one.
    """
    if k < 2:
        raise DataError("k must be at least 2")
    if d.n_rows < k:
        raise DataError(f"{d.n_rows} rows cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    if d.target.is_classification:
        y = d.target.values
        groups = [np.flatnonzero(y == c) for c in (0, 1)]
        if min(len(g) for g in groups) < k:
            raise DataError(f"class count below k={k}")
        order = np.concatenate([rng.permutation(g) for g in groups])
    else:
        order = rng.permutation(d.n_rows)
    assignment = np.empty(d.n_rows, dtype=np.int64)
    assignment[order] = np.arange(d.n_rows) % k
    return FoldPlan(k, assignment)
