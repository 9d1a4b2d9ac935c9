"""Ensemble generalization error via the ambiguity decomposition.

For an equally weighted ensemble of ``m`` prediction vectors the squared
error of the averaged prediction equals the mean member error minus the mean
ambiguity (per-row variance of the members around their average)::

    E = E_bar - A_bar

:class:`EnsembleAggregates` keeps the per-row sum and sum of squares of the
member predictions plus the summed member errors. From those three the
decomposition of ``members + {p}`` costs one pass over the rows, which is what
makes greedy subset selection cheap.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .data import Target


class EnsembleError(ValueError):
    pass


@dataclass(frozen=True)
class EgeValue:
    E: float
    E_bar: float
    A_bar: float


EMPTY = EgeValue(math.inf, math.inf, 0.0)

# E values closer than this (relative) count as tied; the lower id then wins
TIE_RTOL = 1e-12


def _better(e: float, incumbent: float) -> bool:
    return e < incumbent - TIE_RTOL * max(1.0, abs(incumbent))


def _targets(y) -> np.ndarray:
    return np.asarray(y.values if isinstance(y, Target) else y, dtype=float)


def member_error(values: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean((y - values) ** 2))


def ege(members, y) -> EgeValue:
    """Decomposed error of the simple average of ``members`` (batch computation)."""
    members = list(members)
    if not members:
        raise EnsembleError("empty member set")
    y = _targets(y)
    V = np.vstack([np.asarray(p.values, dtype=float) for p in members])
    if V.shape[1] != len(y):
        raise EnsembleError("member length does not match target")
    E_bar = float(np.mean([member_error(v, y) for v in V]))
    centre = V.mean(axis=0)
    A_bar = float(np.mean(((V - centre) ** 2).mean(axis=0)))
    return EgeValue(E_bar - A_bar, E_bar, A_bar)


def direct_error(members, y) -> float:
    """Squared error of the averaged prediction, computed without the decomposition."""
    y = _targets(y)
    centre = np.mean([np.asarray(p.values, dtype=float) for p in members], axis=0)
    return float(np.mean((y - centre) ** 2))


class EnsembleAggregates:
    """Running sums over the current member set.

    ``row_sum`` and ``row_sumsq`` are per-row sums of member predictions and
    of their squares; ``sum_member_error`` is the sum of member errors.
    """

    def __init__(self, y):
        self.y = _targets(y)
        n = len(self.y)
        self.members: list = []
        self.row_sum = np.zeros(n)
        self.row_sumsq = np.zeros(n)
        self.sum_member_error = 0.0

    @property
    def m(self) -> int:
        return len(self.members)

    def copy(self) -> "EnsembleAggregates":
        other = EnsembleAggregates.__new__(EnsembleAggregates)
        other.y = self.y
        other.members = list(self.members)
        other.row_sum = self.row_sum.copy()
        other.row_sumsq = self.row_sumsq.copy()
        other.sum_member_error = self.sum_member_error
        return other

    def _check(self, p):
        if len(p.values) != len(self.y):
            raise EnsembleError("member length does not match target")

    @staticmethod
    def _value(m, row_sum, row_sumsq, sum_err, n) -> EgeValue:
        if m == 0:
            return EMPTY
        mean = row_sum / m
        spread = np.maximum(row_sumsq / m - mean * mean, 0.0)
        E_bar = sum_err / m
        A_bar = float(spread.sum() / n)
        return EgeValue(E_bar - A_bar, E_bar, A_bar)

    def value(self) -> EgeValue:
        return self._value(self.m, self.row_sum, self.row_sumsq, self.sum_member_error, len(self.y))

    def probe(self, p) -> EgeValue:
        """EGE of ``members + {p}`` without changing the aggregates."""
        self._check(p)
        if any(q is p for q in self.members):
            raise EnsembleError(f"member {p.node_id} already in the ensemble")
        v = np.asarray(p.values, dtype=float)
        return self._value(self.m + 1, self.row_sum + v, self.row_sumsq + v * v,
                           self.sum_member_error + member_error(v, self.y), len(self.y))

    def probe_without(self, p) -> EgeValue:
        """EGE of ``members - {p}``."""
        v = np.asarray(p.values, dtype=float)
        return self._value(self.m - 1, self.row_sum - v, self.row_sumsq - v * v,
                           self.sum_member_error - member_error(v, self.y), len(self.y))

    def add(self, p) -> EgeValue:
        self._check(p)
        if any(q is p for q in self.members):
            raise EnsembleError(f"member {p.node_id} already in the ensemble")
        v = np.asarray(p.values, dtype=float)
        self.members.append(p)
        self.row_sum += v
        self.row_sumsq += v * v
        self.sum_member_error += member_error(v, self.y)
        return self.value()

    def remove(self, p) -> EgeValue:
        idx = next(i for i, q in enumerate(self.members) if q is p)
        v = np.asarray(p.values, dtype=float)
        del self.members[idx]
        if not self.members:
            self.row_sum[:] = 0.0
            self.row_sumsq[:] = 0.0
            self.sum_member_error = 0.0
        else:
            self.row_sum -= v
            self.row_sumsq -= v * v
            self.sum_member_error -= member_error(v, self.y)
        return self.value()


def add_member(agg: EnsembleAggregates, p, y=None):
    """Add ``p`` in place; returns ``(agg, EgeValue)`` of the enlarged set."""
    return agg, agg.add(p)


def probe_member(agg: EnsembleAggregates, p, y=None) -> EgeValue:
    return agg.probe(p)


@dataclass
class Selection:
    members: list
    value: EgeValue
    trace: list  # E after each accepted member, in acceptance order

    @property
    def ids(self) -> list:
        return [p.node_id for p in self.members]


def greedy_select(candidates, y, phi: float = 0.0, allow_drop: bool = False) -> Selection:
    """Greedy forward selection minimizing ensemble error.

    Each round probes every remaining candidate and takes the one giving the
    lowest E (ties within ``TIE_RTOL`` go to the lower ``node_id``). It is
    accepted when its E is at most the current E plus ``phi``; otherwise
    selection stops. With
    ``allow_drop``, every acceptance is followed by one pass over the current
    members that drops any member whose removal lowers E. Dropped members are
    not offered again.
    """
    if phi < 0:
        raise EnsembleError("phi must be non-negative")
    pool = sorted(candidates, key=lambda p: p.node_id)
    if not pool:
        raise EnsembleError("no candidates")
    agg = EnsembleAggregates(y)
    current = EMPTY
    trace = []
    while pool:
        best_i, best = 0, None
        for i, p in enumerate(pool):
            v = agg.probe(p)
            if best is None or _better(v.E, best.E):
                best_i, best = i, v
        if not best.E <= current.E + phi:
            break
        current = agg.add(pool.pop(best_i))
        if allow_drop and agg.m > 1:
            for p in list(agg.members):
                if agg.m == 1:
                    break
                if agg.probe_without(p).E < current.E:
                    current = agg.remove(p)
        trace.append(current.E)
    return Selection(list(agg.members), current, trace)


def brute_force_select(candidates, y, cap: int = 20) -> Selection:
    """Exact minimizer of the ensemble error over all non-empty subsets.

    Errors are computed directly from the averaged prediction. Ties (within
    ``TIE_RTOL``) go to the lexicographically smallest sorted id tuple.
    """
    candidates = sorted(candidates, key=lambda p: p.node_id)
    if not candidates:
        raise EnsembleError("no candidates")
    if len(candidates) > cap:
        raise EnsembleError(f"brute force is limited to {cap} candidates")
    y = _targets(y)
    V = np.vstack([np.asarray(p.values, dtype=float) for p in candidates])
    best_err, best_ids, best_subset = math.inf, None, None
    for size in range(1, len(candidates) + 1):
        for subset in itertools.combinations(range(len(candidates)), size):
            err = float(np.mean((y - V[list(subset)].mean(axis=0)) ** 2))
            ids = tuple(candidates[i].node_id for i in subset)
            tied = not _better(err, best_err) and not _better(best_err, err)
            if best_ids is None or _better(err, best_err) or (tied and ids < best_ids):
                best_err, best_ids, best_subset = err, ids, subset
    members = [candidates[i] for i in best_subset]
    return Selection(members, ege(members, y), [])
