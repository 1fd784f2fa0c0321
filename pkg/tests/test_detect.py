import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mivarnet.detect import (
    ConfusionCounts,
    SvmModel,
    confusion_metrics,
    format_confusion_table,
    normalized_confusion,
    svm_predict,
    svm_predict_batch,
    svm_train,
)
from mivarnet.errors import DegenerateClassError, FormatError, ShapeError

PAPER_COUNTS = ConfusionCounts(tp=19419, tn=20000, fp=1265, fn=1028)


def blobs(rng, n, sep=4.0):
    """Two unit-variance 2-D Gaussian blobs at ``(+-sep/2, +-sep/2)``."""
    labels = rng.random(n) < 0.5
    center = sep / 2
    x = rng.standard_normal((n, 2)) + np.where(labels[:, None], center, -center)
    return x, labels


# confusion metrics --------------------------------------------------------------


def test_paper_counts_accuracy():
    assert round(confusion_metrics(PAPER_COUNTS)["accuracy"], 4) == 0.9450


def test_paper_counts_other_ratios():
    m = confusion_metrics(PAPER_COUNTS)
    assert round(m["precision"], 4) == 0.9388
    assert round(m["sensitivity"], 4) == 0.9497
    assert round(m["specificity"], 4) == 0.9405


def test_paper_counts_normalized_matrix():
    m = normalized_confusion(PAPER_COUNTS)
    np.testing.assert_allclose(np.round(m, 3), [[0.950, 0.050], [0.059, 0.941]])
    np.testing.assert_allclose(m.sum(axis=1), 1.0, atol=1e-12)


def test_trivial_counts_all_one():
    assert all(v == 1.0 for v in confusion_metrics(ConfusionCounts(1, 1, 0, 0)).values())


def test_undefined_ratios_are_none():
    m = confusion_metrics(ConfusionCounts(tp=0, tn=3, fp=0, fn=0))
    assert m["precision"] is None and m["sensitivity"] is None and m["specificity"] == 1.0


def test_perfect_classifier_identity_matrix():
    np.testing.assert_array_equal(normalized_confusion(ConfusionCounts(5, 7, 0, 0)), np.eye(2))
    assert "1.00 (TP)" in format_confusion_table(ConfusionCounts(5, 7, 0, 0))


def test_normalized_needs_both_rows():
    with pytest.raises(ValueError):
        normalized_confusion(ConfusionCounts(3, 0, 0, 0))


def test_negative_counts_rejected():
    with pytest.raises(ValueError):
        ConfusionCounts(-1, 0, 0, 0)


@settings(max_examples=100)
@given(st.lists(st.booleans(), min_size=1, max_size=60), st.integers(0, 2**31))
def test_counts_from_predictions(truth, seed):
    pred = np.random.default_rng(seed).random(len(truth)) < 0.5
    c = ConfusionCounts.from_predictions(truth, pred)
    assert c.total == len(truth)
    m = confusion_metrics(c)
    assert m["accuracy"] == (c.tp + c.tn) / c.total
    # each rate only depends on its own true-label row
    c2 = ConfusionCounts(c.tp, c.tn + 5, c.fp + 3, c.fn)
    assert confusion_metrics(c2)["sensitivity"] == m["sensitivity"]


# training -------------------------------------------------------------------------


def test_separable_1d():
    x = np.array([[1.0], [2.0], [-1.0], [-2.0]])
    y = np.array([True, True, False, False])
    model = svm_train(x, y)
    np.testing.assert_array_equal(svm_predict_batch(model, x), y)


def test_duplicated_dataset_same_boundary(rng):
    x, y = blobs(rng, 80, sep=2.0)
    a = svm_train(x, y, seed=1)
    b = svm_train(np.vstack([x, x]), np.concatenate([y, y]), seed=1)
    grid = np.stack(np.meshgrid(np.linspace(-4, 4, 41), np.linspace(-4, 4, 41)), -1).reshape(-1, 2)
    np.testing.assert_array_equal(svm_predict_batch(a, grid), svm_predict_batch(b, grid))


def test_gaussian_blobs_generalize():
    rng = np.random.default_rng(0)
    xtr, ytr = blobs(rng, 400)
    xte, yte = blobs(rng, 1000)
    model = svm_train(xtr, ytr)
    assert np.mean(svm_predict_batch(model, xte) == yte) > 0.99


def test_training_deterministic(rng):
    x, y = blobs(rng, 100, sep=1.0)
    a, b = svm_train(x, y, seed=4, batch_size=16), svm_train(x, y, seed=4, batch_size=16)
    assert a.weights.tobytes() == b.weights.tobytes() and a.bias == b.bias


def test_best_epoch_objective_is_near_optimal(rng):
    # a long run cannot beat the returned model's objective by more than 1%
    x, y = blobs(rng, 200, sep=1.5)
    short = svm_train(x, y, epochs=500)
    long = svm_train(x, y, epochs=5000)

    def objective(m):
        xs = m.standardize(x)
        margins = np.where(y, 1.0, -1.0) * (xs @ m.weights + m.bias)
        w = np.append(m.weights, m.bias)
        return 0.5 * m.lam * w @ w + np.mean(np.maximum(0, 1 - margins))

    assert objective(short) <= 1.01 * objective(long)


def test_far_correct_point_keeps_predictions():
    rng = np.random.default_rng(2)
    x, y = blobs(rng, 300)
    probe, _ = blobs(rng, 200)
    before = svm_predict_batch(svm_train(x, y), probe)
    after = svm_predict_batch(svm_train(np.vstack([x, [[8.0, 8.0]]]), np.append(y, True)), probe)
    assert np.mean(before == after) >= 0.99


def test_constant_feature_dimension_is_tolerated(rng):
    x, y = blobs(rng, 100)
    x = np.hstack([np.full((100, 1), 0.7), x])
    model = svm_train(x, y)
    assert np.all(model.stds > 0) and np.all(np.isfinite(model.weights))


def test_degenerate_classes_rejected():
    with pytest.raises(DegenerateClassError):
        svm_train(np.zeros((4, 2)), [True, True, True, False])


def test_row_label_mismatch():
    with pytest.raises(ShapeError):
        svm_train(np.zeros((4, 2)), [True, False])


# prediction ------------------------------------------------------------------------


def hand_model(w, b):
    w = np.asarray(w, dtype=float)
    return SvmModel(w, float(b), 0.01, np.zeros_like(w), np.ones_like(w))


def test_known_side_is_motion():
    m = hand_model([1.0, -1.0], 0.5)
    assert svm_predict(m, [2.0, 0.0]) is True
    assert svm_predict(m, [-2.0, 0.0]) is False


def test_tie_is_no_motion():
    assert svm_predict(hand_model([1.0], 0.0), [0.0]) is False


@settings(max_examples=50)
@given(st.floats(1e-3, 1e3), st.integers(0, 2**31))
def test_positive_scaling_invariance(alpha, seed):
    r = np.random.default_rng(seed)
    w, b = r.standard_normal(4), r.standard_normal()
    probe = r.standard_normal((50, 4))
    np.testing.assert_array_equal(svm_predict_batch(hand_model(w, b), probe), svm_predict_batch(hand_model(alpha * w, alpha * b), probe))


def test_prediction_matches_dot_product_oracle(rng):
    x, y = blobs(rng, 100, sep=1.0)
    m = svm_train(x, y)
    f = rng.standard_normal((100, 2))
    oracle = [sum(m.weights[j] * (row[j] - m.means[j]) / m.stds[j] for j in range(2)) + m.bias > 0 for row in f]
    assert [svm_predict(m, row) for row in f] == oracle


def test_length_mismatch():
    with pytest.raises(ShapeError):
        svm_predict(hand_model([1.0, 2.0], 0.0), [1.0])


def test_json_roundtrip(rng):
    x, y = blobs(rng, 50)
    m = svm_train(x, y)
    m2 = SvmModel.from_json(m.to_json())
    assert m2.weights.tobytes() == m.weights.tobytes() and m2.bias == m.bias and m2.lam == m.lam
    with pytest.raises(FormatError):
        SvmModel.from_dict({"weights": [1.0]})
