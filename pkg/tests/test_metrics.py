import numpy as np
import pytest
from hypothesis import given, strategies as st

from pitchtrack.errors import InvalidK
from pitchtrack.mccnn import NetShape, TrainConfig
from pitchtrack.metrics import (PITCH_TYPES, SUPERCLASSES, balanced_accuracy, confusion_matrix,
                                cross_validate, kfold_split, load_dataset, pitch_superclass, save_dataset)


def test_perfect_predictions():
    y = np.array([0, 1, 2, 2, 1, 0])
    assert balanced_accuracy(y, y) == 1.0
    assert np.array_equal(confusion_matrix(y, y, normalize_rows=True), np.eye(3))


def test_imbalanced_example():
    labels = np.array([0] * 90 + [1] * 10)
    preds = np.zeros(100, int)
    assert np.mean(preds == labels) == 0.9
    assert balanced_accuracy(preds, labels) == 0.5


def test_random_predictions_near_chance():
    rng = np.random.default_rng(0)
    n, N = 4, 4000
    labels = np.repeat(np.arange(n), N // n)
    ba = balanced_accuracy(rng.integers(0, n, N), labels)
    # per-class recall ~ Binomial(1000, 1/4)/1000; the mean of 4 has sd ~ 0.0068
    sd = np.sqrt((1 / n) * (1 - 1 / n) / (N // n)) / np.sqrt(n)
    assert abs(ba - 1 / n) < 3 * sd


def test_absent_class_excluded(caplog):
    assert balanced_accuracy([0, 2, 2], [0, 0, 0]) == pytest.approx(1 / 3)
    assert "absent" in caplog.text


def test_no_labels():
    with pytest.raises(ValueError):
        balanced_accuracy([], [])


labels_preds = st.integers(2, 6).flatmap(lambda n: st.tuples(
    st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), min_size=1, max_size=60)))


@given(labels_preds)
def test_trace_over_n_is_balanced_accuracy(data):
    n, pairs = data
    t = np.array([a for a, _ in pairs])
    p = np.array([b for _, b in pairs])
    cm = confusion_matrix(p, t, n, normalize_rows=True)
    present = np.unique(t)
    rows = cm.sum(axis=1)
    assert np.allclose(rows[present], 1.0)
    assert np.allclose(np.delete(rows, present), 0.0)
    assert np.trace(cm[np.ix_(present, present)]) / len(present) == pytest.approx(balanced_accuracy(p, t))
    raw = confusion_matrix(p, t, n)
    assert raw.sum() == len(t)


def test_fold_sizes():
    assert [len(te) for _, te in kfold_split(100, 10)] == [10] * 10
    assert sorted(len(te) for _, te in kfold_split(103, 10)) == [10] * 7 + [11] * 3


@given(st.integers(2, 200), st.integers(2, 12), st.integers(0, 100))
def test_folds_partition(n, k, seed):
    if k > n:
        with pytest.raises(InvalidK):
            kfold_split(n, k, seed)
        return
    folds = kfold_split(n, k, seed)
    tests = np.concatenate([te for _, te in folds])
    assert sorted(tests.tolist()) == list(range(n))
    sizes = [len(te) for _, te in folds]
    assert max(sizes) - min(sizes) <= 1
    for tr, te in folds:
        assert not set(tr) & set(te) and len(tr) + len(te) == n
    again = kfold_split(n, k, seed)
    assert all(np.array_equal(a[1], b[1]) for a, b in zip(folds, again))


def test_superclass_mapping():
    assert len(PITCH_TYPES) == 10
    assert {SUPERCLASSES[pitch_superclass(p)] for p in PITCH_TYPES} == set(SUPERCLASSES)
    assert SUPERCLASSES[pitch_superclass("Sinker")] == "Fastballs"
    assert SUPERCLASSES[pitch_superclass("Knuckle curve")] == "Curveballs"
    assert SUPERCLASSES[pitch_superclass("Slider")] == "Breaking Balls"


def test_dataset_roundtrip(tmp_path):
    X = np.random.default_rng(0).normal(size=(5, 24, 10))
    y = np.array([0, 1, 2, 0, 1])
    save_dataset(tmp_path / "d.npz", X, y, 3, ["a", "b", "c"])
    X2, y2, header = load_dataset(tmp_path / "d.npz")
    assert np.allclose(X2, X, atol=1e-6) and y2.tolist() == y.tolist()
    assert header["n_classes"] == 3 and len(header["joints"]) == 12


def test_cross_validate_small():
    rng = np.random.default_rng(0)
    t = np.arange(8)
    X = np.array([np.sin(2 * np.pi * (0.5 + c) * t / 8)[None].repeat(2, 0) + rng.normal(0, 0.05, (2, 8))
                  for c in (0, 1) for _ in range(10)])
    y = np.repeat([0, 1], 10)
    rep = cross_validate(X, y, 2, TrainConfig(learning_rate=0.005, batch_size=8, dtype="float64"), k=5,
                         epochs=40, net_shape=NetShape(2, 8, 2, (8, 8), (5, 9), 16), folds=2)
    assert len(rep.fold_accuracy) == 2
    assert rep.accuracy >= 0.9
    assert np.allclose(rep.confusion.sum(axis=1), 1.0)
    assert set(rep.to_json()) >= {"accuracy", "balanced_accuracy", "confusion_matrix"}
