import json
import math

import numpy as np
import pytest

from histroads.evaluation import brier_score, confusion_matrix, line_metrics, pixel_metrics
from histroads.types import ClassifiedNetwork, GeoRaster, Polyline, ProbabilityField, RasterError, Section, Semantics

from oracles import naive_pixel_metrics, sampled_matched_length


def _cn(items):
    return ClassifiedNetwork({f"x{i}": Section(Polyline(c), k, f"x{i}") for i, (c, k) in enumerate(items)})


def test_identical_networks_score_one():
    gt = _cn([([[0, 0], [100, 0]], 2), ([[0, 50], [80, 90]], 4)])
    rep = line_metrics(gt, gt)
    for c in (2, 4):
        assert math.isclose(rep.per_class[c].completeness, 1.0) and math.isclose(rep.per_class[c].correctness, 1.0)
    assert rep.per_class[1].completeness is None and rep.per_class[1].correctness is None
    assert math.isclose(rep.weighted_completeness, 1.0)


def test_parallel_offset_lines_score_zero():
    rep = line_metrics(_cn([([[0, 0], [100, 0]], 3)]), _cn([([[0, 10], [100, 10]], 3)]))
    assert rep.per_class[3].completeness == 0.0 and rep.per_class[3].correctness == 0.0


def test_partial_class_match_against_sampling_oracle():
    gt = _cn([([[0, 0], [200, 0]], 2)])
    pred = _cn([([[0, 0], [150, 0]], 2), ([[150, 0], [200, 0]], 3)])
    rep = line_metrics(gt, pred, 5)
    # the class-2 prediction buffer reaches 5 m past its end: 155 of 200 m matched
    assert math.isclose(rep.per_class[2].completeness, 155 / 200, abs_tol=1e-9)
    assert math.isclose(rep.per_class[2].correctness, 1.0)
    assert rep.per_class[3].correctness == 0.0
    assert rep.per_class[3].completeness is None
    m, t = sampled_matched_length([[[0, 0], [200, 0]]], [[[0, 0], [150, 0]]], 5)
    assert abs(m / t - rep.per_class[2].completeness) <= 0.005
    # with a vanishing buffer only the shared 150 m count
    tight = line_metrics(gt, pred, 1e-6)
    assert math.isclose(tight.per_class[2].completeness, 0.75, abs_tol=1e-6)


def _random_lines(rng, n, cls_range=(1, 5)):
    out = []
    for _ in range(n):
        start = rng.uniform(0, 300, 2)
        steps = rng.normal(0, 15, (int(rng.integers(2, 6)), 2)) + rng.normal(0, 20, 2)
        out.append((np.vstack([start, start + np.cumsum(steps, axis=0)]), int(rng.integers(*cls_range))))
    return out


@pytest.mark.parametrize("seed", range(6))
def test_line_metrics_match_sampling_oracle(seed):
    rng = np.random.default_rng(seed)
    gt_items = _random_lines(rng, 6, (1, 3))
    pred_items = [(c + rng.normal(0, 2.5, c.shape), k) for c, k in gt_items[:4]] + _random_lines(rng, 2, (1, 3))
    rep = line_metrics(_cn(gt_items), _cn(pred_items), 5)
    for c in (1, 2):
        g = [x for x, k in gt_items if k == c]
        p = [x for x, k in pred_items if k == c]
        s = rep.per_class[c]
        if g:
            m, t = sampled_matched_length(g, p, 5, 0.01)
            assert abs(m / t - s.completeness) <= 0.005
        if p:
            m, t = sampled_matched_length(p, g, 5, 0.01)
            assert abs(m / t - s.correctness) <= 0.005


def test_report_serialization():
    rep = line_metrics(_cn([([[0, 0], [10, 0]], 1)]), _cn([]))
    doc = json.loads(rep.to_json())
    assert doc["classes"]["1"]["completeness"] == 0.0
    assert doc["classes"]["1"]["correctness"] is None
    assert doc["weighted"]["correctness"] is None
    assert "Weighted" in rep.table() and "n/a" in rep.table()


def _probs(rng, shape):
    d = rng.random((6,) + shape)
    return d / d.sum(axis=0)


@pytest.mark.parametrize("seed", range(5))
def test_pixel_metrics_match_naive_oracle(tr, seed):
    rng = np.random.default_rng(seed)
    d = _probs(rng, (32, 32)).astype(np.float32)
    lab = rng.integers(0, 6, (32, 32), dtype=np.uint8)
    f = ProbabilityField(d, tr, validate=False)
    got = pixel_metrics(f, GeoRaster(lab, tr, Semantics.CLASS_LABEL), iou_mode="macro")
    cm, brier = naive_pixel_metrics(d.astype(np.float64), lab)
    n = lab.size
    assert abs(got.accuracy - sum(cm[k][k] for k in range(6)) / n) <= 1e-12
    assert abs(got.brier - brier) <= 1e-12
    precs, recs, f1s, ious = [], [], [], []
    for k in range(6):
        tp = cm[k][k]
        fp = sum(cm[j][k] for j in range(6)) - tp
        fn = sum(cm[k]) - tp
        if sum(cm[k]) == 0:
            continue
        p = tp / (tp + fp) if tp + fp else 0.0
        r = tp / (tp + fn) if tp + fn else 0.0
        precs.append(p)
        recs.append(r)
        f1s.append(2 * p * r / (p + r) if p + r else 0.0)
        ious.append(tp / (tp + fp + fn))
    assert abs(got.macro_precision - np.mean(precs)) <= 1e-12
    assert abs(got.macro_recall - np.mean(recs)) <= 1e-12
    assert abs(got.macro_f1 - np.mean(f1s)) <= 1e-12
    assert abs(got.iou - np.mean(ious)) <= 1e-12


def test_perfect_prediction(tr):
    lab = np.array([[1, 2, 0], [5, 0, 3]], np.uint8)
    d = np.zeros((6, 2, 3), np.float32)
    band = np.where(lab == 0, 5, lab.astype(int) - 1)
    np.put_along_axis(d, band[None], 1.0, axis=0)
    m = pixel_metrics(ProbabilityField(d, tr), GeoRaster(lab, tr, Semantics.CLASS_LABEL))
    assert (m.accuracy, m.macro_f1, m.iou, m.brier) == (1.0, 1.0, 1.0, 0.0)


def test_uniform_field_brier(tr, rng):
    lab = GeoRaster(rng.integers(0, 6, (32, 32), dtype=np.uint8), tr, Semantics.CLASS_LABEL)
    f = ProbabilityField(np.full((6, 32, 32), 1 / 6), tr)
    assert abs(brier_score(f, lab) - 5 / 6) <= 1e-12
    assert abs(pixel_metrics(f, lab).brier - 5 / 6) <= 1e-12


def test_two_by_two_toy(tr):
    # labels {2,2,3,0}; predictions: 2, 3, 3, 0
    lab = np.array([[2, 2], [3, 0]], np.uint8)
    d = np.zeros((6, 2, 2), np.float64)
    d[1, 0, 0] = 0.7; d[0, 0, 0] = 0.3
    d[2, 0, 1] = 0.6; d[1, 0, 1] = 0.4
    d[2, 1, 0] = 1.0
    d[5, 1, 1] = 0.9; d[3, 1, 1] = 0.1
    m = pixel_metrics(ProbabilityField(d, tr), GeoRaster(lab, tr, Semantics.CLASS_LABEL), iou_mode="binary")
    assert m.accuracy == 0.75
    # class 2: P=1, R=.5, F1=2/3; class 3: P=.5, R=1, F1=2/3; no road: 1, 1, 1
    assert math.isclose(m.macro_precision, (1 + 0.5 + 1) / 3)
    assert math.isclose(m.macro_recall, (0.5 + 1 + 1) / 3)
    assert math.isclose(m.macro_f1, (2 / 3 + 2 / 3 + 1) / 3)
    assert m.iou == 1.0
    brier = ((0.3 ** 2 + 0.3 ** 2) + (0.6 ** 2 + 0.6 ** 2) + 0 + (0.1 ** 2 + 0.1 ** 2)) / 4
    assert math.isclose(m.brier, brier, rel_tol=1e-6)
    no_nr = pixel_metrics(ProbabilityField(d, tr), GeoRaster(lab, tr, Semantics.CLASS_LABEL), include_no_road=False)
    assert math.isclose(no_nr.macro_f1, 2 / 3)
    assert no_nr.classes == [2, 3]


def test_eval_mask_and_errors(tr, rng):
    lab = GeoRaster(rng.integers(0, 6, (8, 8), dtype=np.uint8), tr, Semantics.CLASS_LABEL)
    f = ProbabilityField(np.full((6, 8, 8), 1 / 6), tr)
    none = GeoRaster(np.zeros((8, 8), np.uint8), tr, Semantics.BINARY_MASK)
    with pytest.raises(ValueError):
        pixel_metrics(f, lab, none)
    with pytest.raises(RasterError):
        pixel_metrics(f, GeoRaster(np.zeros((4, 4), np.uint8), tr, Semantics.CLASS_LABEL))
    with pytest.raises(ValueError):
        pixel_metrics(f, lab, iou_mode="bogus")


def test_confusion_matrix_counts():
    cm = confusion_matrix(np.array([0, 0, 1, 5]), np.array([0, 1, 1, 0]))
    assert cm[0, 0] == 1 and cm[0, 1] == 1 and cm[1, 1] == 1 and cm[5, 0] == 1 and cm.sum() == 4
