import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsc.coding import SparseCode
from hsc.errors import ParseError, StratificationError
from hsc.pipeline import (EvalReport, Stump, StumpEnsemble, SubjectRecord, adaboost_score, adaboost_train,
                          auc_score, cross_validate, evaluate, kfold_split, load_model, max_pool, nested_split,
                          save_model, stump_weight)


def _code(pairs, t):
    z = np.zeros(t)
    for j, v in pairs:
        z[j] = v
    return SparseCode.from_dense(z)


def test_pool_examples():
    c = _code([(0, 0.5), (2, -1.0)], 3)
    np.testing.assert_array_equal(max_pool([c], 3), [0.5, 0.0, -1.0])
    codes = [_code([(0, 1.0), (1, -2.0)], 2), _code([(0, 3.0)], 2)]
    np.testing.assert_array_equal(max_pool(codes, 2), [3.0, 0.0])
    np.testing.assert_array_equal(max_pool(codes, 2, mode="abs"), [3.0, 2.0])


@settings(max_examples=50)
@given(st.integers(0, 2 ** 32 - 1))
def test_pool_permutation_and_duplication(seed):
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(int(rng.integers(1, 12)), 6)) * (rng.random((1, 6)) < 0.5)
    ref = max_pool([SparseCode.from_dense(z) for z in Z], 6)
    np.testing.assert_array_equal(max_pool(Z[rng.permutation(len(Z))], 6), ref)
    np.testing.assert_array_equal(max_pool(np.vstack([Z, Z[:1]]), 6), ref)
    np.testing.assert_array_equal(ref, Z.max(axis=0))


def test_pool_empty_rejected():
    with pytest.raises(ValueError):
        max_pool([], 3)


def test_separable_one_round():
    X = np.array([[0.1], [0.2], [0.3], [0.7], [0.8], [0.9]])
    y = np.array([0, 0, 0, 1, 1, 1])
    model = adaboost_train(X, rounds=10, y=y)
    assert len(model.rounds) == 1
    assert model.stop_reason == "zero training error"
    assert model.rounds[0].threshold == pytest.approx(0.5)
    assert np.array_equal(model.predict(X), y)


def test_records_interface():
    recs = [SubjectRecord(f"s{i}", np.array([float(i), -float(i)]), int(i >= 3)) for i in range(6)]
    model = adaboost_train(recs, rounds=5)
    assert [int(adaboost_score(model, r.pooled) > 0) for r in recs] == [r.label for r in recs]


def test_alpha_formula():
    assert stump_weight(0.25) == pytest.approx(0.5 * np.log(3))
    assert np.isfinite(stump_weight(0.0))


def test_degenerate_identical_features():
    X = np.ones((6, 3))
    model = adaboost_train(X, y=np.array([0, 1, 0, 1, 0, 1]))
    assert model.rounds == [] and model.stop_reason == "no split candidates"
    np.testing.assert_array_equal(model.margin(X), 0.0)
    np.testing.assert_array_equal(model.predict(X), 0)


def test_no_stump_beats_chance():
    # XOR on one feature: every threshold misclassifies exactly half the weight
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    model = adaboost_train(X, y=np.array([1, 0, 0, 1]), rounds=20)
    assert model.rounds == [] or model.stop_reason in ("no stump beats chance", "max rounds")


def test_single_stump_margin():
    model = StumpEnsemble([Stump(0, 0.0, 1, 0.5, 0.2)])
    assert adaboost_score(model, [1.0]) == 0.5
    assert adaboost_score(model, [-1.0]) == -0.5


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_training_error_below_bound(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 4))
    y = (X[:, 0] + 0.5 * X[:, 1] ** 2 + 0.3 * rng.normal(size=40) > 0.3).astype(int)
    if len(set(y)) < 2:
        return
    model = adaboost_train(X, rounds=15, y=y)
    train_err = np.mean(model.predict(X) != y)
    assert train_err <= model.error_bound() + 1e-12
    assert all(0 <= s.error < 0.5 for s in model.rounds)


def test_model_json_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 5))
    y = (X[:, 2] > 0).astype(int)
    y[:3] ^= 1
    model = adaboost_train(X, rounds=8, y=y)
    path = tmp_path / "m.json"
    save_model(model, path)
    back = load_model(path)
    assert back.rounds == model.rounds
    np.testing.assert_array_equal(back.margin(X), model.margin(X))
    path.write_text('{"format": "other"}')
    with pytest.raises(ParseError):
        load_model(path)


def test_reported_confusion_row():
    pct = EvalReport.from_confusion(10, 3, 13, 3).as_percentages()
    assert pct["SEN"] == "76.92%"
    assert pct["SPE"] == "81.25%"
    assert pct["ACC"] == "79.31%"  # (10 + 13) / 29


def test_auc_examples():
    assert auc_score([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auc_score([0.3] * 6, [0, 1, 0, 1, 1, 0]) == 0.5
    assert auc_score([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_auc_matches_sklearn(seed):
    metrics = pytest.importorskip("sklearn.metrics")
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, 25)
    if len(set(y)) < 2:
        return
    s = np.round(rng.normal(size=25), 1)  # rounding forces ties
    assert auc_score(s, y) == pytest.approx(metrics.roc_auc_score(y, s), abs=1e-12)
    assert auc_score(np.exp(3 * s), y) == pytest.approx(auc_score(s, y), abs=1e-12)


def test_evaluate_identities():
    rng = np.random.default_rng(1)
    s = rng.normal(size=50)
    y = rng.integers(0, 2, 50)
    s[:4] = 0.0
    r = evaluate(s, y)
    P, N = r.tp + r.fn, r.tn + r.fp
    assert (P, N) == (int(y.sum()), int((1 - y).sum()))
    assert r.acc == pytest.approx((r.sen * P + r.spe * N) / (P + N))
    # zero margins count as negative predictions
    assert r.tp + r.fp == int(np.sum(s > 0))


def test_nested_split_sizes():
    labels = np.array([1] * 50 + [0] * 50)
    tr, va, te = nested_split(labels, seed=3)
    assert (len(tr), len(va), len(te)) == (70, 10, 20)
    assert (labels[tr].sum(), labels[va].sum(), labels[te].sum()) == (35, 5, 10)
    assert set(tr) | set(va) | set(te) == set(range(100))
    again = nested_split(labels, seed=3)
    assert all(np.array_equal(a, b) for a, b in zip((tr, va, te), again))


def test_kfold_sizes():
    labels = np.array([1] * 57 + [0] * 58)
    folds = kfold_split(labels, k=5, seed=0)
    assert [len(te) for _, te in folds] == [23] * 5
    tested = np.concatenate([te for _, te in folds])
    assert sorted(tested.tolist()) == list(range(115))
    for tr, te in folds:
        assert not set(tr) & set(te)
        assert abs(labels[te].mean() - labels.mean()) < 0.1
    again = kfold_split(labels, k=5, seed=0)
    assert all(np.array_equal(a[1], b[1]) for a, b in zip(folds, again))


def test_split_errors():
    with pytest.raises(StratificationError):
        kfold_split(np.array([1, 1, 0, 0, 0, 0]), k=5)
    with pytest.raises(StratificationError):
        nested_split(np.array([1, 0, 0, 0, 0]))


def test_cross_validate_protocols():
    rng = np.random.default_rng(2)
    y = np.array([0, 1] * 30)
    X = rng.normal(size=(60, 5))
    X[:, 1] += 3.0 * y
    kf = cross_validate(X, y, "kfold", k=5, rounds=20, seed=1)
    assert len(kf.models) == 5 and not np.isnan(kf.margins).any()
    assert kf.report.auc > 0.85
    ne = cross_validate(X, y, "nested", rounds=20, rounds_grid=[5, 20], seed=1)
    assert ne.selected_rounds[0] in (5, 20)
    assert np.isnan(ne.margins).sum() == 60 - 12
    again = cross_validate(X, y, "kfold", k=5, rounds=20, seed=1)
    np.testing.assert_array_equal(again.margins, kf.margins)
