"""Exploration tree, action space, rewards and the budgeted run loop.

Data nodes hold derived versions of the training table (the root is the
table itself); model nodes hold the out-of-fold predictions of one estimator
fitted on one data node. After every new model node the best ensemble error
``E_min`` over all model nodes is recomputed by greedy selection, and the
step's reward is the drop in ``E_min`` relative to the baseline error.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .data import CATEGORICAL, NUMERIC, Dataset, make_folds
from .ensemble import Selection, greedy_select
from .estimators import (
    CLASSIFIERS,
    default_hp,
    derive_seed,
    cv_predict,
    estimators_for,
    fit,
)
from .hpo import HpoTimeout, optimize
from .transforms import TRANSFORMS, TransformConfig, applicable, fit_apply, replay_chain

log = logging.getLogger(__name__)

KIND_RANK = {"transform": 0, "estimator": 1, "hpo": 2}

FEATURE_NAMES = (
    "bias",
    "node_mean_perf",
    "node_best_perf",
    "estimator_mean_perf",
    "transform_mean_gain",
    "transform_best_gain",
    "remaining_fraction",
    "total_budget",
    "numeric_count",
    "categorical_count",
    "has_datetime",
    "remaining_x_node_mean_perf",
    "remaining_x_node_best_perf",
    "node_depth",
    "kind_transform",
    "kind_estimator",
    "kind_hpo",
)
N_FEATURES = len(FEATURE_NAMES)


class BudgetTooSmall(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    k_folds: int = 5
    depth_cap: int = 4
    hpo_fraction: float = 0.1
    hpo_min_seconds: float = 2.0
    hpo_evals: int = 4  # evaluations per HPO action when the clock counts iterations
    phi: float = 0.0
    allow_drop: bool = False
    transforms: TransformConfig = field(default_factory=TransformConfig)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "transforms"}
        out["transforms"] = dict(self.transforms.__dict__)
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        raw = dict(raw)
        tc = TransformConfig(**raw.pop("transforms", {}))
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(transforms=tc, **raw)


class Clock:
    """Time budget of a run.

    With ``iteration_cap`` set the clock is virtual: each action costs
    ``t_max / iteration_cap`` seconds regardless of wall time, which makes runs
    reproducible. Otherwise elapsed wall time is charged against ``t_max``.
    """

    def __init__(self, t_max: float, iteration_cap: int | None = None, timer=time.perf_counter):
        if t_max <= 0:
            raise ValueError("t_max must be positive")
        self.t_max = float(t_max)
        self.iteration_cap = iteration_cap
        self.timer = timer
        self.steps = 0
        self._t0 = timer()

    @property
    def virtual(self) -> bool:
        return self.iteration_cap is not None

    def restart(self):
        self.steps = 0
        self._t0 = self.timer()

    def tick(self):
        self.steps += 1

    @property
    def elapsed(self) -> float:
        if self.virtual:
            if self.iteration_cap == 0:
                return self.t_max
            return self.steps * self.t_max / self.iteration_cap
        return self.timer() - self._t0

    @property
    def remaining_seconds(self) -> float:
        return max(0.0, self.t_max - self.elapsed)

    @property
    def remaining_fraction(self) -> float:
        return self.remaining_seconds / self.t_max

    @property
    def exhausted(self) -> bool:
        if self.virtual:
            return self.steps >= self.iteration_cap
        return self.elapsed >= self.t_max


@dataclass(frozen=True, order=True)
class Action:
    data_node: int
    kind: str
    name: str

    def sort_key(self):
        catalog = TRANSFORMS if self.kind == "transform" else _ALL_ESTIMATORS
        return (self.data_node, KIND_RANK[self.kind], catalog.index(self.name))

    def describe(self) -> str:
        verb = {"transform": "ApplyTransform", "estimator": "FitEstimator", "hpo": "RunHpo"}
        return f"{verb[self.kind]}({self.data_node},{self.name})"


_ALL_ESTIMATORS = CLASSIFIERS + ("random_forest_reg", "ridge_regression", "knn_reg")


@dataclass(eq=False)
class DataNode:
    id: int
    dataset: Dataset
    parent: int | None = None
    spec: object = None  # TransformSpec that produced this node
    depth: int = 0
    noop: bool = False


@dataclass(eq=False)
class ModelNode:
    id: int
    data_node: int
    estimator: str
    hyperparams: dict
    prediction: object  # PredictionVector
    hpo: bool = False

    @property
    def cv_error(self) -> float:
        return self.prediction.cv_error


@dataclass
class StepOutcome:
    step: int
    action: Action
    reward: float
    e_min: float
    elapsed: float
    new_data_node: int | None = None
    new_model_node: int | None = None
    noop: bool = False


class ExplorationTree:
    def __init__(self, root: Dataset, config: RunConfig | None = None, folds=None, seed: int = 0):
        self.config = config or RunConfig()
        self.seed = seed
        self.task = root.task
        self.folds = folds if folds is not None else make_folds(
            root, self.config.k_folds, derive_seed(seed, "folds"))
        self.data_nodes = [DataNode(0, root)]
        self.model_nodes: list = []
        self.action_log: list = []
        self.applied: set = set()
        self.best_selection: Selection | None = None
        self.baseline_error: float | None = None
        self.incumbents: dict = {}
        y = root.target.values.astype(float)
        # regression errors are put on the classification scale by the target variance
        self.error_scale = 1.0 if root.target.is_classification else max(float(y.var()), 1e-12)

    @property
    def root(self) -> Dataset:
        return self.data_nodes[0].dataset

    @property
    def e_min(self) -> float:
        return self.best_selection.value.E if self.best_selection else math.inf

    def models_on(self, data_node: int) -> list:
        return [m for m in self.model_nodes if m.data_node == data_node]

    def performance(self, m: ModelNode) -> float:
        return 1.0 - m.cv_error / self.error_scale

    def lineage(self, data_node: int) -> list:
        """Transform specs from the root down to ``data_node``."""
        specs = []
        node = self.data_nodes[data_node]
        while node.parent is not None:
            specs.append(node.spec)
            node = self.data_nodes[node.parent]
        return specs[::-1]

    def transform_gains(self, transform: str) -> list:
        """Relative drop in best model error from parent to child for past uses of ``transform``."""
        gains = []
        base = self.baseline_error
        if not base or base <= 1e-12:
            return gains
        for node in self.data_nodes[1:]:
            if node.noop or node.spec.id != transform:
                continue
            child, parent = self.models_on(node.id), self.models_on(node.parent)
            if child and parent:
                best_parent = min(m.cv_error for m in parent)
                best_child = min(m.cv_error for m in child)
                gains.append((best_parent - best_child) / base)
        return gains

    def add_model(self, data_node: int, prediction, hpo: bool = False) -> ModelNode:
        node = ModelNode(len(self.model_nodes), data_node, prediction.estimator,
                         dict(prediction.hyperparams), prediction, hpo)
        prediction.node_id = node.id
        self.model_nodes.append(node)
        return node

    def reselect(self) -> float:
        """Greedy selection over all model nodes; keeps the better of old and new."""
        sel = greedy_select([m.prediction for m in self.model_nodes], self.root.target,
                            phi=self.config.phi, allow_drop=self.config.allow_drop)
        if self.best_selection is None or sel.value.E < self.best_selection.value.E:
            self.best_selection = sel
        return self.e_min

    def model_seed(self, data_node: int, estimator: str) -> int:
        return derive_seed(self.seed, "model", data_node, estimator)


def reward(prev_e_min: float, new_e_min: float, baseline: float) -> float:
    """Immediate reward: drop in best ensemble error, relative to the baseline error.

    A numerically zero baseline (perfectly predictable data) yields 0, as does
    a step taken before any ensemble existed (``prev_e_min`` infinite).
    """
    if baseline <= 1e-12 or not math.isfinite(prev_e_min):
        return 0.0
    return (prev_e_min - new_e_min) / baseline


def enumerate_actions(tree: ExplorationTree, clock: Clock | None = None) -> list:
    """All legal, not-yet-taken actions in deterministic order."""
    actions = []
    estimators = estimators_for(tree.task)
    for node in tree.data_nodes:
        if node.noop:
            continue
        if node.depth < tree.config.depth_cap:
            for t in TRANSFORMS:
                a = Action(node.id, "transform", t)
                if a not in tree.applied and applicable(node.dataset, t, tree.config.transforms):
                    actions.append(a)
        fitted = {m.estimator for m in tree.models_on(node.id) if not m.hpo}
        tuned = {m.estimator for m in tree.models_on(node.id) if m.hpo}
        for e in estimators:
            if e not in fitted:
                actions.append(Action(node.id, "estimator", e))
        for e in estimators:
            a = Action(node.id, "hpo", e)
            if e in fitted and e not in tuned and a not in tree.applied:
                actions.append(a)
    return actions


def featurize(tree: ExplorationTree, clock: Clock, a: Action) -> np.ndarray:
    """State characteristics of ``tree`` conditioned on candidate action ``a``."""
    f = np.zeros(N_FEATURES)
    node = tree.data_nodes[a.data_node]
    rho = clock.remaining_fraction
    f[0] = 1.0
    perf = [tree.performance(m) for m in tree.models_on(node.id)]
    if perf:
        f[1] = float(np.mean(perf))
        f[2] = max(perf)
    if a.kind in ("estimator", "hpo"):
        same = [tree.performance(m) for m in tree.model_nodes if m.estimator == a.name]
        if same:
            f[3] = float(np.mean(same))
    else:
        gains = tree.transform_gains(a.name)
        if gains:
            f[4] = float(np.mean(gains))
            f[5] = max(gains)
    f[6] = rho
    f[7] = math.log1p(clock.t_max) / math.log1p(7200.0)
    d = node.dataset
    f[8] = min(1.0, math.log1p(len(d.of_kind(NUMERIC))) / math.log1p(1000.0))
    f[9] = min(1.0, math.log1p(len(d.of_kind(CATEGORICAL))) / math.log1p(1000.0))
    f[10] = 1.0 if d.has_datetime else 0.0
    f[11] = rho * f[1]
    f[12] = rho * f[2]
    f[13] = node.depth / tree.config.depth_cap if tree.config.depth_cap else 0.0
    f[14 + KIND_RANK[a.kind]] = 1.0
    return f


def apply_action(tree: ExplorationTree, a: Action, clock: Clock, seed: int | None = None) -> StepOutcome:
    """Carry out ``a``, grow the tree and return the step's reward."""
    if a in tree.applied:
        raise ValueError(f"action {a.describe()} was already taken")
    node = tree.data_nodes[a.data_node]
    prev = tree.e_min
    out = StepOutcome(len(tree.action_log), a, 0.0, prev, 0.0)
    t0 = time.perf_counter()

    if a.kind == "transform":
        new_ds, spec = fit_apply(node.dataset, a.name, None, tree.config.transforms)
        child = DataNode(len(tree.data_nodes), new_ds, node.id, spec, node.depth + 1, spec.noop)
        tree.data_nodes.append(child)
        out.new_data_node, out.noop = child.id, spec.noop
    elif a.kind == "estimator":
        pv = cv_predict(a.name, default_hp(a.name), node.dataset, tree.folds,
                        seed=tree.model_seed(node.id, a.name))
        out.new_model_node = tree.add_model(node.id, pv).id
    else:
        out.new_model_node, out.noop = _run_hpo(tree, node, a.name, clock)

    tree.applied.add(a)
    tree.action_log.append(a)
    if out.new_model_node is not None:
        tree.reselect()
    out.e_min = tree.e_min
    out.reward = reward(prev, out.e_min, tree.baseline_error)
    if not clock.virtual:
        out.elapsed = clock.elapsed
    log.debug("step %d %s E_min=%.6f reward=%.6f (%.2fs)", out.step, a.describe(),
              out.e_min, out.reward, time.perf_counter() - t0)
    return out


def _run_hpo(tree, node, estimator, clock):
    default = next(m for m in tree.models_on(node.id) if m.estimator == estimator and not m.hpo)
    if clock.virtual:
        box, cap = None, tree.config.hpo_evals
    else:
        box = max(tree.config.hpo_min_seconds, tree.config.hpo_fraction * clock.remaining_seconds)
        cap = None
    try:
        res = optimize(node.dataset, tree.folds, estimator, time_box=box,
                       incumbent=tree.incumbents.get(estimator),
                       seed=tree.model_seed(node.id, estimator), max_evals=cap,
                       default_result=default.prediction)
    except HpoTimeout:
        return None, True
    tree.incumbents[estimator] = res.incumbent
    return tree.add_model(node.id, res.best, hpo=True).id, False


# -- fitted ensemble --------------------------------------------------------

@dataclass
class FittedMember:
    model_node: int
    data_node: int
    lineage: list
    model: object  # FittedModel
    cv_error: float

    def predict(self, d: Dataset) -> np.ndarray:
        return self.model.predict(replay_chain(self.lineage, d))


@dataclass
class FittedEnsemble:
    members: list

    def predict(self, d: Dataset) -> np.ndarray:
        return np.mean([m.predict(d) for m in self.members], axis=0)


def refit_member(tree: ExplorationTree, model_node: int) -> FittedMember:
    m = tree.model_nodes[model_node]
    ds = tree.data_nodes[m.data_node].dataset
    model = fit(m.estimator, m.hyperparams, ds, ds.target, derive_seed(tree.seed, "refit", m.id))
    return FittedMember(m.id, m.data_node, tree.lineage(m.data_node), model, m.cv_error)


@dataclass
class RunResult:
    tree: ExplorationTree
    selection: Selection
    ensemble: FittedEnsemble
    baseline: FittedMember
    steps: list
    clock: Clock


class Exploration:
    """One exploration episode over a training table, driven action by action.

    Exposes the ``actions`` / ``features`` / ``step`` / ``done`` protocol that
    the Q-learning trainer consumes.
    """

    def __init__(self, d: Dataset, clock: Clock, config: RunConfig | None = None, seed: int = 0):
        self.clock = clock
        self.tree = ExplorationTree(d, config, seed=seed)
        self.steps: list = []
        clock.restart()
        baseline = "random_forest" if d.target.is_classification else "random_forest_reg"
        pv = cv_predict(baseline, default_hp(baseline), d, self.tree.folds,
                        seed=self.tree.model_seed(0, baseline))
        self.tree.add_model(0, pv)
        self.tree.baseline_error = pv.cv_error
        self.tree.reselect()
        if not clock.virtual and clock.exhausted:
            raise BudgetTooSmall(f"fitting the baseline took {clock.elapsed:.1f}s of {clock.t_max}s")

    @property
    def done(self) -> bool:
        return self.clock.exhausted

    def actions(self) -> list:
        return enumerate_actions(self.tree, self.clock)

    def features(self, a: Action) -> np.ndarray:
        return featurize(self.tree, self.clock, a)

    def step(self, a: Action) -> float:
        out = apply_action(self.tree, a, self.clock)
        self.clock.tick()
        if self.clock.virtual:
            out.elapsed = self.clock.elapsed
        self.steps.append(out)
        return out.reward

    def finalize(self) -> RunResult:
        tree = self.tree
        final = greedy_select([m.prediction for m in tree.model_nodes], tree.root.target,
                              phi=tree.config.phi, allow_drop=tree.config.allow_drop)
        if final.value.E < tree.best_selection.value.E:
            tree.best_selection = final
        sel = tree.best_selection
        members = [refit_member(tree, i) for i in sel.ids]
        baseline = next((m for m in members if m.model_node == 0), None) or refit_member(tree, 0)
        return RunResult(tree, sel, FittedEnsemble(members), baseline, self.steps, self.clock)


def run(d: Dataset, clock: Clock, policy=None, config: RunConfig | None = None, seed: int = 0,
        epsilon: float = 0.0) -> RunResult:
    """Explore ``d`` under ``clock`` following ``policy`` and return the fitted ensemble."""
    from .policy import default_policy, select_action

    policy = policy if policy is not None else default_policy()
    env = Exploration(d, clock, config, seed)
    rng = np.random.default_rng(derive_seed(seed, "policy"))
    while not clock.exhausted:
        acts = env.actions()
        if not acts:
            break
        env.step(select_action(policy, env, acts, epsilon=epsilon, rng=rng))
    return env.finalize()
