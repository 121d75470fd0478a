"""Extraction and classification metrics.

Line metrics follow the buffer method: the share of ground-truth length lying
within a buffer around the predicted lines (completeness) and vice versa
(correctness), evaluated per road class. Pixel metrics compare an argmax
labelling and the raw probabilities with a class-label raster.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional

import numpy as np
from shapely import LineString, intersection, unary_union

from .types import (
    N_CLASSES,
    N_PROB_BANDS,
    NO_ROAD_BAND,
    ClassifiedNetwork,
    GeoRaster,
    ProbabilityField,
    RasterError,
)

DEFAULT_LINE_BUFFER = 5.0
BUFFER_QUAD_SEGS = 32


@dataclass
class ClassLineScore:
    gt_length: float
    pred_length: float
    gt_matched: float
    pred_matched: float

    @property
    def completeness(self) -> Optional[float]:
        return self.gt_matched / self.gt_length if self.gt_length > 0 else None

    @property
    def correctness(self) -> Optional[float]:
        return self.pred_matched / self.pred_length if self.pred_length > 0 else None


@dataclass
class LineMetricReport:
    per_class: Dict[int, ClassLineScore]
    buffer: float

    @property
    def weighted_completeness(self) -> Optional[float]:
        num = sum(s.gt_matched for s in self.per_class.values() if s.gt_length > 0)
        den = sum(s.gt_length for s in self.per_class.values())
        return num / den if den > 0 else None

    @property
    def weighted_correctness(self) -> Optional[float]:
        num = sum(s.pred_matched for s in self.per_class.values() if s.pred_length > 0)
        den = sum(s.pred_length for s in self.per_class.values())
        return num / den if den > 0 else None

    def to_dict(self) -> dict:
        return {
            "buffer_m": self.buffer,
            "classes": {
                str(c): {
                    "completeness": s.completeness,
                    "correctness": s.correctness,
                    "gt_length_m": s.gt_length,
                    "pred_length_m": s.pred_length,
                }
                for c, s in sorted(self.per_class.items())
            },
            "weighted": {"completeness": self.weighted_completeness, "correctness": self.weighted_correctness},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self) -> str:
        """Per-class rows plus a weighted row, percentages."""

        def pct(v):
            return "     n/a" if v is None else f"{100 * v:8.2f}"

        lines = [f"{'':10s} {'Comp. [%]':>9s} {'Corr. [%]':>9s}"]
        for c, s in sorted(self.per_class.items()):
            lines.append(f"Class {c:<4d} {pct(s.completeness):>9s} {pct(s.correctness):>9s}")
        lines.append(f"{'Weighted':10s} {pct(self.weighted_completeness):>9s} {pct(self.weighted_correctness):>9s}")
        return "\n".join(lines)


def _merged(lines) -> Optional[object]:
    geoms = [LineString(l.coords) for l in lines]
    if not geoms:
        return None
    return unary_union(geoms)


def _length_within(lines, zone) -> float:
    if zone is None or not lines:
        return 0.0
    return float(sum(intersection(LineString(l.coords), zone).length for l in lines))


def line_metrics(gt: ClassifiedNetwork, pred: ClassifiedNetwork, buffer: float = DEFAULT_LINE_BUFFER) -> LineMetricReport:
    """Per-class completeness and correctness with a ``buffer``-meter tolerance.

    Only same-class matches count. Buffers are polygonal (``BUFFER_QUAD_SEGS``
    segments per quarter circle) and intersections are exact against them.
    """
    gt_by, pred_by = gt.by_class(), pred.by_class()
    out = {}
    for c in range(1, N_CLASSES + 1):
        g, p = gt_by[c], pred_by[c]
        g_zone = _merged(g).buffer(buffer, quad_segs=BUFFER_QUAD_SEGS) if g else None
        p_zone = _merged(p).buffer(buffer, quad_segs=BUFFER_QUAD_SEGS) if p else None
        out[c] = ClassLineScore(
            gt_length=float(sum(l.length for l in g)),
            pred_length=float(sum(l.length for l in p)),
            gt_matched=_length_within(g, p_zone),
            pred_matched=_length_within(p, g_zone),
        )
    return LineMetricReport(out, buffer)


# -- pixel metrics -----------------------------------------------------------


def label_to_band(labels: np.ndarray) -> np.ndarray:
    """Class label (0 = no road) to probability band index."""
    return np.where(labels == 0, NO_ROAD_BAND, labels.astype(np.int64) - 1)


@dataclass
class MetricSet:
    accuracy: float
    macro_f1: float
    macro_precision: float
    macro_recall: float
    iou: float
    brier: float
    n_pixels: int
    n_classes: int = N_PROB_BANDS
    tp: List[int] = field(default_factory=list)
    fp: List[int] = field(default_factory=list)
    fn: List[int] = field(default_factory=list)
    classes: List[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def confusion_matrix(true_band: np.ndarray, pred_band: np.ndarray, n: int = N_PROB_BANDS) -> np.ndarray:
    return np.bincount(true_band * n + pred_band, minlength=n * n).reshape(n, n)


def pixel_metrics(pred: ProbabilityField, labels: GeoRaster, eval_mask: Optional[GeoRaster] = None,
                  include_no_road: bool = True, iou_mode: str = "binary") -> MetricSet:
    """Accuracy, macro F1/precision/recall, IoU and Brier score.

    Classes are the five road classes plus no-road (label 0). Macro averages
    run over classes present in ``labels``; ``include_no_road=False`` drops
    the no-road class from them. ``iou_mode`` is "binary" (road vs no road)
    or "macro" (mean per-class IoU over the same classes as the macro scores).
    """
    if not pred.same_grid(labels):
        raise RasterError("prediction and labels are on different grids")
    lab = labels.band
    if lab.max(initial=0) > N_CLASSES:
        raise RasterError("labels must be in 0..5")
    sel = eval_mask.band.astype(bool) if eval_mask is not None else np.ones(lab.shape, bool)
    y = label_to_band(lab[sel])
    probs = pred.data[:, sel].astype(np.float64)
    n = y.size
    if n == 0:
        raise ValueError("no pixels to evaluate")
    yhat = np.argmax(probs, axis=0)
    cm = confusion_matrix(y, yhat)
    tp = np.diag(cm)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    support = cm.sum(axis=1)
    present = [j for j in range(N_PROB_BANDS) if support[j] > 0 and (include_no_road or j != NO_ROAD_BAND)]

    def ratio(a, b):
        return a / b if b > 0 else 0.0

    prec = np.array([ratio(tp[j], tp[j] + fp[j]) for j in range(N_PROB_BANDS)])
    rec = np.array([ratio(tp[j], tp[j] + fn[j]) for j in range(N_PROB_BANDS)])
    f1 = np.array([ratio(2 * prec[j] * rec[j], prec[j] + rec[j]) for j in range(N_PROB_BANDS)])
    macro = (lambda v: float(np.mean(v[present])) if present else math.nan)
    if iou_mode == "binary":
        road_true = y != NO_ROAD_BAND
        road_pred = yhat != NO_ROAD_BAND
        union = np.count_nonzero(road_true | road_pred)
        iou = np.count_nonzero(road_true & road_pred) / union if union else math.nan
    elif iou_mode == "macro":
        per = np.array([ratio(tp[j], tp[j] + fp[j] + fn[j]) for j in range(N_PROB_BANDS)])
        iou = macro(per)
    else:
        raise ValueError(f"unknown iou_mode {iou_mode!r}")
    onehot = np.zeros_like(probs)
    onehot[y, np.arange(n)] = 1.0
    brier = float(np.sum((probs - onehot) ** 2) / n)
    return MetricSet(
        accuracy=float(tp.sum() / n),
        macro_f1=macro(f1),
        macro_precision=macro(prec),
        macro_recall=macro(rec),
        iou=float(iou),
        brier=brier,
        n_pixels=int(n),
        tp=tp.tolist(), fp=fp.tolist(), fn=fn.tolist(),
        classes=[j + 1 if j != NO_ROAD_BAND else 0 for j in present],
    )


def brier_score(pred: ProbabilityField, labels: GeoRaster, eval_mask: Optional[GeoRaster] = None) -> float:
    lab = labels.band
    sel = eval_mask.band.astype(bool) if eval_mask is not None else np.ones(lab.shape, bool)
    y = label_to_band(lab[sel])
    probs = pred.data[:, sel].astype(np.float64)
    probs[y, np.arange(y.size)] -= 1.0
    return float(np.sum(probs ** 2) / y.size)
