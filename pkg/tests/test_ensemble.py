import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ensemble_explorer.ensemble import (
    EnsembleAggregates, EnsembleError, add_member, brute_force_select, direct_error, ege,
    greedy_select, probe_member)
from ensemble_explorer.estimators import PredictionVector


def pv(i, values, y):
    values = np.asarray(values, dtype=float)
    return PredictionVector(i, values, float(np.mean((values - np.asarray(y)) ** 2)), "t", {})


def test_single_and_identical_members():
    y = [1.0, 0.0, 1.0]
    a = pv(0, [0.7, 0.2, 0.4], y)
    v = ege([a], y)
    assert v.E == pytest.approx(a.cv_error) and v.A_bar == 0.0
    v2 = ege([a, pv(1, a.values, y)], y)
    assert v2.A_bar == pytest.approx(0.0, abs=1e-15) and v2.E == pytest.approx(a.cv_error)


def test_two_member_hand_example():
    y = [1.0, 0.0]
    v = ege([pv(0, [1, 1], y), pv(1, [0, 0], y)], y)
    assert (v.E_bar, v.A_bar, v.E) == pytest.approx((0.5, 0.25, 0.25))


def test_incremental_ops():
    y = [1.0, 0.0, 1.0, 0.0]
    a, b = pv(0, [0.9, 0.3, 0.6, 0.2], y), pv(1, [0.4, 0.1, 0.8, 0.5], y)
    agg = EnsembleAggregates(y)
    assert probe_member(agg, a).E == pytest.approx(a.cv_error)
    before = (agg.row_sum.copy(), agg.row_sumsq.copy(), agg.sum_member_error, agg.m)
    probe = probe_member(agg, b)
    assert np.array_equal(before[0], agg.row_sum) and before[2:] == (agg.sum_member_error, agg.m)
    agg, v = add_member(agg, b)
    assert v == probe
    agg, v = add_member(agg, a)
    assert v.E == pytest.approx(ege([a, b], y).E, abs=1e-12)
    with pytest.raises(EnsembleError):
        add_member(agg, a)


def test_greedy_worked_example():
    y = [1, 0, 1, 0]
    v1 = pv(1, [1, 0, 1, 1], y)
    v2 = pv(2, [1, 0, 0, 0], y)
    v3 = pv(3, [0.6, 0.4, 0.6, 0.4], y)
    assert (v1.cv_error, v2.cv_error, v3.cv_error) == pytest.approx((0.25, 0.25, 0.16))
    sel = greedy_select([v1, v2, v3], y)
    assert sel.ids[:2] == [3, 1]
    assert sel.trace[:2] == pytest.approx([0.16, 0.1525])
    best = brute_force_select([v1, v2, v3], y)
    assert sel.value.E >= best.value.E - 1e-12
    assert best.value.E == pytest.approx(direct_error(best.members, y))


def test_greedy_trivial_cases():
    y = [1.0, 0.0]
    only = pv(0, [0.8, 0.1], y)
    sel = greedy_select([only], y)
    assert sel.ids == [0] and sel.value.E == pytest.approx(only.cv_error)
    with pytest.raises(EnsembleError):
        greedy_select([], y)
    with pytest.raises(EnsembleError):
        greedy_select([only], y, phi=-1)


def test_greedy_tie_goes_to_lower_id():
    y = [1.0, 0.0]
    a, b = pv(5, [0.5, 0.5], y), pv(2, [0.5, 0.5], y)
    assert greedy_select([a, b], y).ids[0] == 2


def test_phi_and_drop_variants():
    rng = np.random.default_rng(0)
    y = rng.integers(0, 2, 80).astype(float)
    cands = [pv(i, np.clip(y + rng.normal(scale=0.5, size=80), 0, 1), y) for i in range(8)]
    strict = greedy_select(cands, y)
    loose = greedy_select(cands, y, phi=0.01)
    assert len(loose.members) >= len(strict.members)
    dropped = greedy_select(cands, y, phi=0.01, allow_drop=True)
    assert dropped.value.E == pytest.approx(ege(dropped.members, y).E, abs=1e-12)


def test_brute_force_basics():
    y = [1.0, 0.0, 1.0]
    a = pv(0, [0.9, 0.2, 0.6], y)
    assert brute_force_select([a], y).ids == [0]
    dup = brute_force_select([a, pv(1, a.values, y)], y)
    assert dup.value.E == pytest.approx(a.cv_error)
    with pytest.raises(EnsembleError):
        brute_force_select([pv(i, a.values, y) for i in range(21)], y)


def test_brute_force_superset_monotone():
    rng = np.random.default_rng(1)
    y = rng.normal(size=40)
    cands = [pv(i, y + rng.normal(size=40), y) for i in range(7)]
    es = [brute_force_select(cands[:k], y).value.E for k in range(1, 8)]
    assert all(b <= a + 1e-12 for a, b in zip(es, es[1:]))


member_sets = st.integers(1, 6).flatmap(lambda m: st.integers(2, 30).flatmap(
    lambda n: st.tuples(arrays(float, (m, n), elements=st.floats(-5, 5)),
                        arrays(float, n, elements=st.floats(-5, 5)))))


@settings(max_examples=150, deadline=None)
@given(member_sets)
def test_decomposition_properties(data):
    V, y = data
    members = [pv(i, v, y) for i, v in enumerate(V)]
    val = ege(members, y)
    assert abs(val.E - direct_error(members, y)) <= 1e-9
    assert val.A_bar >= -1e-15
    agree = np.all(np.abs(V - V[0]) <= 1e-12)
    if agree:
        assert val.A_bar <= 1e-12
    agg = EnsembleAggregates(y)
    for p in members:
        inc = agg.add(p)
        assert np.all(agg.row_sum ** 2 <= agg.m * agg.row_sumsq + 1e-9)  # Cauchy-Schwarz
    assert abs(inc.E - val.E) <= 1e-12 * max(1.0, abs(val.E_bar))
    sel = greedy_select(members, y)
    assert sel.value.E <= min(p.cv_error for p in members) + 1e-12
    assert all(b <= a + 1e-12 for a, b in zip(sel.trace, sel.trace[1:]))
    assert sel.value.E >= brute_force_select(members, y).value.E - 1e-12
