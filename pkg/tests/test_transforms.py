import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from builders import make_ds
from ensemble_explorer.data import DataError
from ensemble_explorer.transforms import (
    TRANSFORMS, TransformConfig, applicable, fit_apply, principal_axes, replay, replay_chain)


def _num(values, y=None):
    y = np.arange(len(values)) % 2 if y is None else y
    return make_ds({"a": ("numeric", values)}, y)


def test_catalog():
    assert len(TRANSFORMS) == 10
    assert "feature_selection" in TRANSFORMS


def test_applicable_rules():
    cats = make_ds({"c": ("categorical", ["a", "b"])}, [0, 1])
    assert not applicable(cats, "tanh")
    mixed = make_ds({"c": ("categorical", ["a", "b"]), "x": ("numeric", [1.0, 2.0])}, [0, 1])
    assert applicable(mixed, "groupby_stddev")
    assert not applicable(_num([1.0, 2.0]), "pca")


def test_freq_example():
    out, spec = fit_apply(_num([1, 2, 2, 9]), "freq")
    assert out.column("a~freq").values.tolist() == [1, 2, 2, 1]
    unseen = replay(spec, _num([7, 2]))
    assert unseen.column("a~freq").values.tolist() == [0, 2]


def test_minmax_example_and_extrapolation():
    out, spec = fit_apply(_num([0, 5, 10]), "minmaxscaler")
    assert out.column("a~minmaxscaler").values.tolist() == [0.0, 0.5, 1.0]
    assert replay(spec, _num([20])).column("a~minmaxscaler").values.tolist() == [2.0]


def test_groupby_sample_stddev():
    d = make_ds({"k": ("categorical", ["a", "a", "b", "b"]), "v": ("numeric", [1, 3, 5, 5])},
                [0, 1, 0, 1])
    out, _ = fit_apply(d, "groupby_stddev")
    got = out.column("v|k~groupby_stddev").values
    # group a = {1, 3}: sample std with denominator n - 1 is sqrt(2); group b is constant
    np.testing.assert_allclose(got, [np.sqrt(2), np.sqrt(2), 0.0, 0.0])


def test_cbrt_signed():
    out, _ = fit_apply(_num([8, 27, -8]), "cbrt")
    np.testing.assert_allclose(out.column("a~cbrt").values, [2, 3, -2])


def test_degenerate_noop_and_inapplicable():
    out, spec = fit_apply(_num([3, 3, 3, 3]), "stdscaler")
    assert spec.noop and out.names == ["a"]
    with pytest.raises(DataError):
        fit_apply(_num([1.0, 2.0]), "pca")


def test_train_mask_only():
    d = _num([0, 10, 1000])
    mask = np.array([True, True, False])
    out, spec = fit_apply(d, "minmaxscaler", mask)
    assert out.column("a~minmaxscaler").values.tolist() == [0.0, 1.0, 100.0]


def test_feature_selection_keeps_strongest():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 2, 200)
    d = make_ds({"good": ("numeric", y + 0.1 * rng.normal(size=200)),
                 "noise": ("numeric", rng.normal(size=200))}, y)
    out, spec = fit_apply(d, "feature_selection")
    assert out.names == ["good"]
    assert replay(spec, d).names == ["good"]


def test_pca_orthonormal():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(6, 6))
    cov = A @ A.T
    vecs, vals = principal_axes(cov, 4)
    G = np.asarray(vecs) @ np.asarray(vecs).T
    np.testing.assert_allclose(G, np.eye(4), atol=1e-6)
    np.testing.assert_allclose(vals, np.sort(np.linalg.eigvalsh(cov))[::-1][:4], rtol=1e-6)


def test_lineage_chain_replay():
    rng = np.random.default_rng(2)
    n = 60
    d = make_ds({"x": ("numeric", rng.normal(size=n) ** 3), "z": ("numeric", rng.normal(size=n)),
                 "c": ("categorical", rng.choice(["p", "q", "r"], n))}, np.arange(n) % 2)
    specs, cur = [], d
    for t in ("cbrt", "freq", "pca", "stdscaler"):
        cur, spec = fit_apply(cur, t)
        specs.append(spec)
    again = replay_chain(specs, d)
    assert again.names == cur.names
    for c in cur.columns:
        if c.kind == "numeric":
            np.testing.assert_allclose(again.column(c.name).values, c.values)
        else:
            assert again.column(c.name).values.tolist() == c.values.tolist()
    assert cur.column("x~cbrt").lineage[0][0] == "cbrt"


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=3, max_size=40),
       st.sampled_from(["round", "minmaxscaler", "tanh", "cbrt", "sigmoid", "stdscaler"]))
def test_unary_properties(values, t):
    d = make_ds({"a": ("numeric", values), "b": ("numeric", np.arange(len(values)))},
                np.arange(len(values)) % 2)
    out, spec = fit_apply(d, t)
    assert out.n_rows == d.n_rows
    assert len(out.columns) >= len(d.columns)
    if spec.noop:
        return
    for c in out.columns[len(d.columns):]:
        v = c.values
        assert np.all(np.isfinite(v))
        if t == "minmaxscaler":
            assert v.min() >= -1e-12 and v.max() <= 1 + 1e-12
        if t == "sigmoid":
            assert np.all((v >= 0) & (v <= 1))
        if t == "tanh":
            assert np.all(np.abs(v) <= 1)
    again = replay(spec, d)
    for c in out.columns:
        assert np.array_equal(again.column(c.name).values, c.values)
