"""Anytime hyper-parameter search for one (dataset, estimator) pair.

The search evaluates the estimator's default point, then the warm-start
incumbent if one exists, then alternates uniform random draws with Gaussian
perturbations of the best point so far. It stops when the time box or the
evaluation cap runs out; an evaluation already started is allowed to finish.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .data import Dataset, FoldPlan
from .estimators import SPACES, cv_predict, default_hp, derive_seed, hp_key, validate_hp


class HpoTimeout(RuntimeError):
    """No evaluation could start inside the time box."""


@dataclass(frozen=True)
class Incumbent:
    estimator: str
    best_hp: dict
    best_cv_error: float


@dataclass
class Trial:
    hyperparams: dict
    cv_error: float
    origin: str


@dataclass
class HpoResult:
    best: object  # PredictionVector
    incumbent: Incumbent
    trials: list = field(default_factory=list)


def sample_uniform(id: str, rng: np.random.Generator) -> dict:
    hp = {}
    for p in SPACES[id]:
        if p.kind == "choice":
            hp[p.name] = p.choices[int(rng.integers(len(p.choices)))]
        else:
            hp[p.name] = p.from_unit(float(rng.random()))
    return hp


def perturb(id: str, hp: dict, rng: np.random.Generator, scale: float = 0.1,
            switch_prob: float = 0.2) -> dict:
    """Gaussian step of ``scale`` times each numeric range (log range for log-scaled params).

    Categorical params switch to a uniformly drawn other value with
    probability ``switch_prob``.
    """
    out = {}
    for p in SPACES[id]:
        v = hp[p.name]
        if p.kind == "choice":
            if len(p.choices) > 1 and rng.random() < switch_prob:
                others = [c for c in p.choices if c != v]
                v = others[int(rng.integers(len(others)))]
            out[p.name] = v
        else:
            out[p.name] = p.from_unit(p.to_unit(v) + scale * float(rng.standard_normal()))
    return out


def _candidates(id, incumbent, rng):
    yield default_hp(id), "default"
    if incumbent is not None:
        yield dict(incumbent.best_hp), "incumbent"
    while True:
        yield None, "random"
        yield None, "perturb"


def optimize(d: Dataset, folds: FoldPlan, id: str, time_box: float | None = None,
             incumbent: Incumbent | None = None, seed: int = 0, max_evals: int | None = None,
             default_result=None, node_id: int = -1, timer=time.perf_counter) -> HpoResult:
    """Search hyper-parameters of ``id`` on ``d`` by cross-validated squared error.

    ``time_box`` is in seconds; ``max_evals`` caps the number of configurations
    (at least one of the two must be given). Every configuration is
    cross-validated with the same ``seed`` so comparisons share their noise;
    passing ``default_result`` (the default point's prediction vector under that
    seed) saves re-fitting it. Returns the best prediction vector of this call
    and the updated incumbent, which only ever improves.
    """
    if time_box is None and max_evals is None:
        raise ValueError("give a time box, an evaluation cap, or both")
    if time_box is not None and time_box <= 0:
        raise ValueError("time_box must be positive")
    if incumbent is not None and incumbent.estimator != id:
        raise ValueError("incumbent belongs to another estimator")

    start = timer()
    rng = np.random.default_rng(derive_seed(seed, "hpo-search", id))
    seen = set()
    trials = []
    best = None
    repeats = 0
    for hp, origin in _candidates(id, incumbent, rng):
        if max_evals is not None and len(trials) >= max_evals:
            break
        if time_box is not None and timer() - start >= time_box:
            break
        if origin == "random":
            hp = sample_uniform(id, rng)
        elif origin == "perturb":
            hp = perturb(id, best.hyperparams, rng)
        key = hp_key(hp)
        if key in seen:
            repeats += 1
            if repeats > 100:  # space exhausted
                break
            continue
        repeats = 0
        seen.add(key)
        validate_hp(id, hp)
        if origin == "default" and default_result is not None:
            pv = default_result
        else:
            pv = cv_predict(id, hp, d, folds, seed=seed, node_id=node_id)
        trials.append(Trial(dict(hp), pv.cv_error, origin))
        if best is None or pv.cv_error < best.cv_error:
            best = pv
    if best is None:
        raise HpoTimeout(f"{id}: time box expired before any evaluation")

    best = replace(best, node_id=node_id)
    if incumbent is None or best.cv_error < incumbent.best_cv_error:
        new_inc = Incumbent(id, dict(best.hyperparams), best.cv_error)
    else:
        new_inc = incumbent
    return HpoResult(best, new_inc, trials)
