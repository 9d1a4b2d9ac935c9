import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from builders import make_ds
from ensemble_explorer.data import make_folds
from ensemble_explorer.estimators import (
    CLASSIFIERS, DEFAULTS, REGRESSORS, SPACES, Encoder, EstimatorError, cv_predict, default_hp,
    derive_seed, fit, validate_hp)


def _separable(n=200, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    return make_ds({"x": ("numeric", x), "z": ("numeric", rng.normal(size=n))}, (x > 0).astype(int))


def test_rosters_and_defaults():
    assert len(CLASSIFIERS) == 4 and len(REGRESSORS) == 3
    assert DEFAULTS["random_forest"] == {"n_trees": 100, "max_depth": 12, "min_leaf": 2,
                                         "feature_subsample": "sqrt"}
    assert DEFAULTS["gradient_boosted_trees"] == {"n_rounds": 100, "learning_rate": 0.1,
                                                  "max_depth": 3}
    assert DEFAULTS["logistic_regression"] == {"l2": 1e-3, "epochs": 200}
    assert DEFAULTS["knn"] == {"k": 5, "weighting": "uniform"}
    for id in SPACES:
        validate_hp(id, default_hp(id))


def test_validate_rejects_out_of_space():
    hp = default_hp("knn")
    hp["k"] = 0
    with pytest.raises(EstimatorError):
        validate_hp("knn", hp)
    with pytest.raises(EstimatorError):
        validate_hp("knn", {"k": 3})


def test_derive_seed_stable_and_distinct():
    assert derive_seed(1, "fold", 0) == derive_seed(1, "fold", 0)
    assert derive_seed(1, "fold", 0) != derive_seed(1, "fold", 1)
    assert derive_seed(1, "fold", 0) != derive_seed(2, "fold", 0)


def test_knn_k1_recovers_training_labels():
    d = _separable(50)
    m = fit("knn", {"k": 1, "weighting": "uniform"}, d, d.target)
    assert np.array_equal(m.predict(d), d.target.values)


def test_logistic_two_points():
    d = make_ds({"x": ("numeric", [-1.0, 1.0])}, [0, 1])
    p = fit("logistic_regression", default_hp("logistic_regression"), d, d.target).predict(d)
    assert p[0] < 0.5 < p[1]


def test_forest_deterministic():
    d = _separable()
    hp = dict(default_hp("random_forest"), n_trees=50)
    a = fit("random_forest", hp, d, d.target, seed=3).predict(d)
    b = fit("random_forest", hp, d, d.target, seed=3).predict(d)
    assert np.array_equal(a, b)


def test_task_mismatch_and_single_class():
    d = _separable()
    with pytest.raises(EstimatorError):
        fit("ridge_regression", {"l2": 1.0}, d, d.target)
    one = make_ds({"x": ("numeric", [1.0, 2.0])}, [1, 1])
    with pytest.raises(EstimatorError):
        fit("knn", default_hp("knn"), one, one.target)


@pytest.mark.parametrize("id", ["random_forest", "gradient_boosted_trees"])
def test_tree_models_learn_single_feature(id):
    d = _separable()
    pv = cv_predict(id, default_hp(id), d, make_folds(d, 5, 0))
    assert pv.cv_error <= 0.05


@pytest.mark.parametrize("id", CLASSIFIERS)
def test_cv_predictions_are_probabilities_and_complete(id):
    d = _separable(120, seed=1)
    pv = cv_predict(id, default_hp(id), d, make_folds(d, 5, 0))
    assert np.all(np.isfinite(pv.values))
    assert np.all((pv.values >= 0) & (pv.values <= 1))
    assert pv.cv_error == pytest.approx(np.mean((pv.values - d.target.values) ** 2))


def test_cv_out_of_fold():
    # predictions of a fold must not change when that fold's own labels change
    d = _separable(100, seed=2)
    folds = make_folds(d, 5, 0)
    base = cv_predict("knn", default_hp("knn"), d, folds).values
    _, test = folds.split(0)
    y = d.target.values.copy()
    y[test] = 1 - y[test]
    flipped = make_ds({c.name: ("numeric", c.values) for c in d.columns}, y)
    again = cv_predict("knn", default_hp("knn"), flipped, folds).values
    assert np.array_equal(base[test], again[test])


def test_knn_full_k_gives_base_rate():
    d = _separable(50, seed=4)
    folds = make_folds(d, 5, 0)
    n_train = d.n_rows - folds.sizes().max()
    pv = cv_predict("knn", {"k": n_train, "weighting": "uniform"}, d, folds)
    for f in range(5):
        tr, te = folds.split(f)
        if len(tr) == n_train:
            np.testing.assert_allclose(pv.values[te], d.target.values[tr].mean(), atol=1e-9)


def test_slow_gbt_close_to_constant():
    d = _separable(200, seed=5)
    pv = cv_predict("gradient_boosted_trees", {"n_rounds": 10, "learning_rate": 0.01,
                                               "max_depth": 3}, d, make_folds(d, 5, 0))
    const = float(np.var(d.target.values))
    assert pv.cv_error <= const + 0.05


@pytest.mark.parametrize("id", REGRESSORS)
def test_regressors(id):
    rng = np.random.default_rng(6)
    x = rng.normal(size=150)
    d = make_ds({"x": ("numeric", x)}, 2 * x + 0.1 * rng.normal(size=150), task="regression")
    pv = cv_predict(id, default_hp(id), d, make_folds(d, 5, 0))
    assert pv.cv_error < np.var(d.target.values) * 0.3


def test_encoder_one_hot_and_ordinal():
    few = ["a", "b", "a", "c"]
    many = [f"L{i % 15}" for i in range(30)] + ["L0"] * 5
    d = make_ds({"f": ("categorical", (few * 9)[:35]),
                 "m": ("categorical", many)}, np.arange(35) % 2)
    X = Encoder.fit(d).transform(d)
    assert X.shape == (35, 3 + 1)  # three one-hot columns plus one ordinal column
    unseen = make_ds({"f": ("categorical", ["zzz"]), "m": ("categorical", ["zzz"])}, [0])
    assert np.all(np.isfinite(Encoder.fit(d).transform(unseen)))


@settings(max_examples=15, deadline=None)
@given(k=st.integers(1, 50), w=st.sampled_from(["uniform", "inverse_distance"]),
       seed=st.integers(0, 10))
def test_knn_space_predictions_bounded(k, w, seed):
    d = _separable(60, seed)
    pv = cv_predict("knn", {"k": k, "weighting": w}, d, make_folds(d, 5, seed))
    assert np.all((pv.values >= 0) & (pv.values <= 1))
