import math

import numpy as np
import pytest

from builders import make_ds
from ensemble_explorer.estimators import PredictionVector
from ensemble_explorer.exploration import (
    FEATURE_NAMES, Action, BudgetTooSmall, Clock, Exploration, ExplorationTree, RunConfig,
    apply_action, enumerate_actions, featurize, reward, run)
from ensemble_explorer.policy import PolicyWeights, select_action
from ensemble_explorer.synthetic import planted_nonlinearity


def fake_pv(err, n):
    # constant predictions whose squared error against an all-zero target is ``err``
    return PredictionVector(-1, np.full(n, math.sqrt(err)), err, "knn", {"k": 5, "weighting": "uniform"})


def test_reward_examples():
    assert reward(0.3, 0.3, 0.25) == 0.0
    assert reward(0.25, 0.20, 0.25) == pytest.approx(0.2)
    assert reward(0.20, 0.15, 0.25) == pytest.approx(0.2)
    assert reward(0.2, 0.1, 0.0) == 0.0


def test_clock_modes():
    c = Clock(100, 4)
    assert c.virtual and c.remaining_fraction == 1.0
    c.tick()
    assert c.elapsed == 25.0 and c.remaining_fraction == 0.75
    for _ in range(3):
        c.tick()
    assert c.exhausted
    t = [0.0]
    w = Clock(10, timer=lambda: t[0])
    t[0] = 4.0
    assert not w.virtual and w.remaining_seconds == 6.0 and not w.exhausted
    t[0] = 10.0
    assert w.exhausted
    with pytest.raises(ValueError):
        Clock(0)


def test_fresh_tree_enumeration(planted_small):
    tree = ExplorationTree(planted_small)
    acts = enumerate_actions(tree)
    kinds = [a.kind for a in acts]
    assert kinds.count("transform") == 10 and kinds.count("estimator") == 4
    assert "hpo" not in kinds
    assert acts == sorted(acts, key=Action.sort_key)


def test_hpo_enumerated_after_fit(planted_small):
    tree = ExplorationTree(planted_small)
    tree.baseline_error = 0.25
    apply_action(tree, Action(0, "estimator", "random_forest"), Clock(60, 10))
    acts = enumerate_actions(tree)
    assert Action(0, "hpo", "random_forest") in acts
    assert Action(0, "estimator", "random_forest") not in acts


def test_depth_cap_blocks_transforms(planted_small):
    tree = ExplorationTree(planted_small, RunConfig(depth_cap=0))
    assert all(a.kind != "transform" for a in enumerate_actions(tree))


def test_noop_transform_node():
    d = make_ds({"a": ("numeric", [1, 2, 3, 4, 5, 6, 7, 8, 9, 10])}, [0, 1] * 5)
    tree = ExplorationTree(d, RunConfig(k_folds=2))
    tree.baseline_error = 0.25
    out = apply_action(tree, Action(0, "transform", "round"), Clock(60, 5))
    assert out.noop and out.reward == 0.0
    assert tree.data_nodes[1].noop
    assert all(a.data_node == 0 for a in enumerate_actions(tree))
    with pytest.raises(ValueError):
        apply_action(tree, Action(0, "transform", "round"), Clock(60, 5))


def test_featurize_examples(planted_small):
    n = planted_small.n_rows
    tree = ExplorationTree(planted_small)
    clock = Clock(60, 2)
    f = featurize(tree, clock, Action(0, "transform", "cbrt"))
    assert np.all(f[1:6] == 0) and f[6] == 1.0 and f[0] == 1.0
    assert f[14:].tolist() == [1.0, 0.0, 0.0]

    tree.baseline_error = 0.25
    tree.add_model(0, fake_pv(0.25, n))
    child = apply_action(tree, Action(0, "transform", "cbrt"), clock).new_data_node
    tree.add_model(child, fake_pv(0.20, n))
    f = featurize(tree, clock, Action(child, "transform", "cbrt"))
    assert f[4] == pytest.approx(0.2) and f[5] == pytest.approx(0.2)

    clock.tick()  # rho = 0.5
    f = featurize(tree, clock, Action(child, "estimator", "knn"))
    assert f[6] == 0.5 and f[1] == pytest.approx(0.8)
    assert f[11] == pytest.approx(0.4)
    assert f[13] == pytest.approx(1 / 4)
    assert len(f) == len(FEATURE_NAMES) == 17


def test_zero_iterations_gives_baseline(planted_small):
    res = run(planted_small, Clock(60, 0), seed=0)
    assert res.selection.ids == [0] and res.steps == []
    x = planted_small
    np.testing.assert_array_equal(res.ensemble.predict(x), res.baseline.predict(x))


def test_one_iteration_never_worse(planted_small):
    res = run(planted_small, Clock(60, 1), seed=0)
    assert res.selection.value.E <= res.tree.baseline_error + 1e-15


def test_run_invariants_random_policy(planted_small):
    clock = Clock(60, 14)
    env = Exploration(planted_small, clock, seed=4)
    rng = np.random.default_rng(0)
    zero = PolicyWeights.zeros()
    e_prev = env.tree.e_min
    while not env.done:
        acts = env.actions()
        for a in acts:
            f = env.features(a)
            assert np.all(np.isfinite(f))
            assert all(0.0 <= f[i] <= 1.0 for i in (6, 8, 9, 10, 13))
        a = select_action(zero, env, acts, epsilon=1.0, rng=rng)
        env.step(a)
        assert env.tree.e_min <= e_prev
        e_prev = env.tree.e_min
    log = env.tree.action_log
    assert len(set(log)) == len(log)
    for m in env.tree.model_nodes:
        assert len(m.prediction.values) == planted_small.n_rows
    res = env.finalize()
    assert len(res.ensemble.members) >= 1


def test_run_deterministic_in_iteration_mode(planted_small):
    a = run(planted_small, Clock(60, 6), seed=11)
    b = run(planted_small, Clock(60, 6), seed=11)
    assert [s.action for s in a.steps] == [s.action for s in b.steps]
    assert [s.e_min for s in a.steps] == [s.e_min for s in b.steps]
    for m, n in zip(a.tree.model_nodes, b.tree.model_nodes):
        assert np.array_equal(m.prediction.values, n.prediction.values)


def test_hpo_step_adds_sibling(planted_small):
    tree = ExplorationTree(planted_small, RunConfig(hpo_evals=2))
    tree.baseline_error = 0.25
    clock = Clock(60, 5)
    apply_action(tree, Action(0, "estimator", "knn"), clock)
    out = apply_action(tree, Action(0, "hpo", "knn"), clock)
    assert tree.model_nodes[out.new_model_node].hpo
    assert len(tree.models_on(0)) == 2
    assert "knn" in tree.incumbents


def test_wall_budget_too_small(planted_small):
    with pytest.raises(BudgetTooSmall):
        Exploration(planted_small, Clock(1e-6))


def test_regression_run():
    d = planted_nonlinearity(300, seed=1, task="regression")
    res = run(d, Clock(60, 5), seed=0)
    assert res.tree.error_scale == pytest.approx(np.var(d.target.values))
    total = sum(s.reward for s in res.steps)
    assert total == pytest.approx((res.tree.baseline_error - res.tree.e_min) / res.tree.baseline_error,
                                  abs=1e-9)
