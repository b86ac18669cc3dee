import numpy as np
import pytest

from lesionseg.metrics import (
    METRIC_NAMES,
    OVERLAY_FN,
    OVERLAY_FP,
    OVERLAY_TN,
    OVERLAY_TP,
    ConfusionCounts,
    EvalRecord,
    MetricSet,
    aggregate,
    confusion,
    metrics_from_counts,
    render_overlay,
)
from lesionseg.postprocess import jaccard

from oracles import confusion_enumerate


def record(**metrics) -> EvalRecord:
    ms = MetricSet(**{name: metrics.get(name, 0.0) for name in METRIC_NAMES})
    return EvalRecord("x", ConfusionCounts(1, 1, 1, 1), ms, 0.0, 2, 0.0)


def test_confusion_small_example():
    pred = np.array([[1, 1], [0, 0]], dtype=bool)
    truth = np.array([[1, 0], [1, 0]], dtype=bool)
    c = confusion(pred, truth)
    assert (c.tp, c.fp, c.fn, c.tn) == (1, 1, 1, 1)
    assert c.total == 4


def test_confusion_matches_enumeration_oracle():
    rng = np.random.default_rng(16)
    for _ in range(20):
        pred = rng.random((8, 8)) < 0.5
        truth = rng.random((8, 8)) < 0.5
        c = confusion(pred, truth)
        assert (c.tp, c.tn, c.fp, c.fn) == confusion_enumerate(pred, truth)


def test_confusion_shape_mismatch():
    with pytest.raises(ValueError):
        confusion(np.zeros((2, 2), bool), np.zeros((2, 3), bool))


def test_metrics_perfect_prediction():
    m = metrics_from_counts(ConfusionCounts(tp=10, tn=20, fp=0, fn=0))
    assert m.as_dict() == {name: 1.0 for name in METRIC_NAMES}


def test_metrics_balanced_counts():
    m = metrics_from_counts(ConfusionCounts(tp=1, tn=1, fp=1, fn=1))
    assert m.sensitivity == 0.5
    assert m.specificity == 0.5
    assert m.accuracy == 0.5
    assert m.f_measure == pytest.approx(0.5)
    assert m.jaccard == pytest.approx(1 / 3)


def test_metrics_empty_prediction_on_lesion():
    m = metrics_from_counts(ConfusionCounts(tp=0, tn=50, fp=0, fn=50))
    assert m.sensitivity == 0.0
    assert m.specificity == 1.0
    assert m.jaccard == 0.0
    assert m.f_measure == 0.0  # precision falls back to 1, recall is 0


def test_metrics_all_background_scores_perfectly():
    m = metrics_from_counts(ConfusionCounts(tp=0, tn=64, fp=0, fn=0))
    assert m.as_dict() == {name: 1.0 for name in METRIC_NAMES}


def test_metrics_zero_total_rejected():
    with pytest.raises(ValueError):
        metrics_from_counts(ConfusionCounts(0, 0, 0, 0))


def test_metric_identities_on_random_counts():
    rng = np.random.default_rng(17)
    for _ in range(50):
        tp, tn, fp, fn = (int(v) for v in rng.integers(0, 30, 4))
        if tp + tn + fp + fn == 0:
            continue
        m = metrics_from_counts(ConfusionCounts(tp, tn, fp, fn))
        assert m.accuracy == pytest.approx((tp + tn) / (tp + tn + fp + fn), abs=1e-12)
        # F = 2TP / (2TP + FP + FN) whenever it is defined
        if tp + fp and tp + fn:
            assert m.f_measure == pytest.approx(2 * tp / (2 * tp + fp + fn), abs=1e-12)
        # swapping prediction and truth swaps fp with fn
        swapped = metrics_from_counts(ConfusionCounts(tp, tn, fn, fp))
        assert swapped.sensitivity == pytest.approx(
            tp / (tp + fp) if tp + fp else 1.0, abs=1e-12
        )
        assert swapped.jaccard == pytest.approx(m.jaccard, abs=1e-12)


def test_confusion_jaccard_agrees_with_mask_jaccard():
    rng = np.random.default_rng(18)
    for _ in range(10):
        pred = rng.random((12, 12)) < 0.4
        truth = rng.random((12, 12)) < 0.4
        m = metrics_from_counts(confusion(pred, truth))
        assert m.jaccard == pytest.approx(jaccard(pred, truth), abs=1e-12)


def test_aggregate_mean_and_population_std():
    recs = [record(accuracy=0.8), record(accuracy=1.0)]
    mean, std = aggregate(recs)["accuracy"]
    assert mean == pytest.approx(0.9, abs=1e-12)
    assert std == pytest.approx(0.1, abs=1e-12)  # population, not sample
    only = aggregate([record(jaccard=0.7)])
    assert only["jaccard"] == (pytest.approx(0.7), pytest.approx(0.0))


def test_aggregate_requires_records():
    with pytest.raises(ValueError):
        aggregate([])


def test_overlay_colors_exact():
    pred = np.array([[1, 1], [0, 0]], dtype=bool)
    truth = np.array([[1, 0], [1, 0]], dtype=bool)
    base = np.full((2, 2, 3), 99, dtype=np.uint8)
    out = render_overlay(pred, truth, base)
    assert tuple(out[0, 0]) == OVERLAY_TP
    assert tuple(out[0, 1]) == OVERLAY_FP
    assert tuple(out[1, 0]) == OVERLAY_FN
    assert tuple(out[1, 1]) == OVERLAY_TN


def test_overlay_partitions_all_pixels():
    rng = np.random.default_rng(19)
    pred = rng.random((9, 9)) < 0.5
    truth = rng.random((9, 9)) < 0.5
    out = render_overlay(pred, truth, np.zeros((9, 9, 3), dtype=np.uint8))
    palette = {OVERLAY_TP, OVERLAY_TN, OVERLAY_FN, OVERLAY_FP}
    seen = {tuple(px) for px in out.reshape(-1, 3)}
    assert seen <= palette
    # a perfect prediction renders in the two blues only
    perfect = render_overlay(truth, truth, np.zeros((9, 9, 3), dtype=np.uint8))
    assert {tuple(px) for px in perfect.reshape(-1, 3)} <= {OVERLAY_TP, OVERLAY_TN}
