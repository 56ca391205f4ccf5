"""Frame-level detection evaluation: greedy IoU matching, precision-recall
curves, all-point average precision, frame-mAP, localization recall and
classification accuracy."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import IO, Iterable, Sequence

import numpy as np

from actdet.annot import FrameAnnotation, GroundTruthBox, _int, _lines, _number, _parse_box
from actdet.errors import InputError
from actdet.geom import BBox

DEFAULT_IOU = 0.5


@dataclass(frozen=True, slots=True)
class Detection:
    video_id: str
    frame_index: int
    class_id: int
    confidence: float
    bbox: BBox

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise InputError(f"confidence {self.confidence!r} outside [0, 1]")
        if self.class_id < 0:
            raise InputError(f"negative class id {self.class_id}")


@dataclass(frozen=True)
class MatchOutcome:
    """Per-detection results, aligned with the input detection order.

    ``gt_index[i]`` indexes the ground-truth list passed to ``match_frame``.
    For false positives ``iou[i]`` is the best overlap with a still-unmatched
    same-class box at the time the detection was considered.
    """

    tp: tuple[bool, ...]
    gt_index: tuple[int | None, ...]
    iou: tuple[float, ...]


@dataclass(frozen=True)
class PRCurve:
    tp_cum: tuple[int, ...]
    total_gt: int

    @property
    def recall(self) -> np.ndarray:
        if self.total_gt == 0:
            return np.zeros(0)
        return np.asarray(self.tp_cum, dtype=float) / self.total_gt

    @property
    def precision(self) -> np.ndarray:
        return np.asarray(self.tp_cum, dtype=float) / np.arange(1, len(self.tp_cum) + 1)

    def points(self) -> list[tuple[float, float]]:
        """(recall, precision) pairs in rank order."""
        return list(zip(self.recall.tolist(), self.precision.tolist()))


@dataclass(frozen=True)
class ClassResult:
    class_id: int
    ap: float  # nan when the class has no ground truth
    tp: int
    fp: int
    n_gt: int


@dataclass(frozen=True)
class EvalReport:
    classes: tuple[ClassResult, ...]
    frame_map: float
    loc_recall: float
    cls_acc: float
    iou_threshold: float

    def ap(self, class_id: int) -> float:
        return self.classes[class_id].ap

    def to_csv(self) -> str:
        """Per-class AP in percent, then summary rows (also percent)."""
        lines = ["action_index,ap_percent"]
        for c in self.classes:
            lines.append(f"{c.class_id + 1},{_pct(c.ap)}")
        lines.append(f"map,{_pct(self.frame_map)}")
        lines.append(f"loc_recall,{_pct(self.loc_recall)}")
        lines.append(f"cls_acc,{_pct(self.cls_acc)}")
        return "\n".join(lines) + "\n"

    def summary(self) -> str:
        return f"map={self.frame_map:.6f} loc_recall={self.loc_recall:.6f} cls_acc={self.cls_acc:.6f}"


def _pct(x: float) -> str:
    return "nan" if math.isnan(x) else f"{100.0 * x:.4f}"


def table3(reports: dict[str, EvalReport]) -> str:
    """Per-action AP (%) side by side, one column per model."""
    names = list(reports)
    n = max((len(r.classes) for r in reports.values()), default=0)
    header = ["Action index"] + names
    rows = []
    for i in range(n):
        row = [str(i + 1)]
        for name in names:
            cls = reports[name].classes
            row.append(f"{100 * cls[i].ap:.1f}" if i < len(cls) and not math.isnan(cls[i].ap) else "-")
        rows.append(row)
    rows.append(["mAP"] + [f"{100 * reports[m].frame_map:.2f}" for m in names])
    widths = [max(len(r[j]) for r in [header] + rows) for j in range(len(header))]
    fmt = lambda r: "  ".join(v.rjust(w) for v, w in zip(r, widths))
    return "\n".join([fmt(header), "  ".join("-" * w for w in widths)] + [fmt(r) for r in rows]) + "\n"


# -- matching ----------------------------------------------------------------

def _iou_t(a, b) -> float:
    iw = min(a[2], b[2]) - max(a[0], b[0])
    if iw <= 0:
        return 0.0
    ih = min(a[3], b[3]) - max(a[1], b[1])
    if ih <= 0:
        return 0.0
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return min(1.0, inter / union)


def _greedy(gt, dets, thr: float, class_aware: bool):
    """gt: [(cls, box)], dets: [(cls, conf, box)].

    Detections are visited by descending confidence (stable); each takes the
    highest-IoU unmatched box (first index on ties) if that IoU reaches ``thr``.
    """
    n = len(dets)
    tp = [False] * n
    gidx: list[int | None] = [None] * n
    ious = [0.0] * n
    taken = [False] * len(gt)
    for i in sorted(range(n), key=lambda k: -dets[k][1]):
        dcls, _, dbox = dets[i]
        best, best_j = 0.0, -1
        for j, (gcls, gbox) in enumerate(gt):
            if taken[j] or (class_aware and gcls != dcls):
                continue
            v = _iou_t(dbox, gbox)
            if v > best:
                best, best_j = v, j
        ious[i] = best
        if best_j >= 0 and best >= thr:
            taken[best_j] = True
            tp[i] = True
            gidx[i] = best_j
    return tp, gidx, ious


def match_frame(gt: Sequence[GroundTruthBox], dets: Sequence[Detection],
                iou_threshold: float = DEFAULT_IOU) -> MatchOutcome:
    if not 0.0 < iou_threshold <= 1.0:
        raise InputError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    if len({(d.video_id, d.frame_index) for d in dets}) > 1:
        raise InputError("match_frame got detections from more than one frame")
    g = [(b.class_id, b.bbox.as_tuple()) for b in gt]
    d = [(x.class_id, x.confidence, x.bbox.as_tuple()) for x in dets]
    tp, gidx, ious = _greedy(g, d, iou_threshold, class_aware=True)
    return MatchOutcome(tuple(tp), tuple(gidx), tuple(ious))


# -- PR curve and AP ---------------------------------------------------------

def pr_curve(flags: Sequence[bool], confidences: Sequence[float] | None, total_gt: int) -> PRCurve:
    """Cumulative precision/recall over rank-ordered TP/FP flags.

    ``confidences`` (if given) must be non-increasing.
    """
    if total_gt < 0:
        raise InputError("total_gt must be >= 0")
    if confidences is not None:
        if len(confidences) != len(flags):
            raise InputError("flags and confidences differ in length")
        for a, b in zip(confidences, confidences[1:]):
            if b > a:
                raise InputError("flags are not sorted by descending confidence")
    if total_gt == 0:
        if any(flags):
            raise InputError("true positives with zero ground truth")
        return PRCurve((), 0)
    cum, acc = [], 0
    for f in flags:
        acc += bool(f)
        cum.append(acc)
    if acc > total_gt:
        raise InputError(f"{acc} true positives exceed {total_gt} ground-truth boxes")
    return PRCurve(tuple(cum), total_gt)


def average_precision(curve: PRCurve) -> float:
    """All-point interpolated AP, computed in exact rational arithmetic.

    Recall steps by 1/total_gt at each TP rank k, so the area under the
    precision envelope is (1/total_gt) * sum over TP ranks k of
    max_{j >= k} tp_j / j.
    """
    cum = curve.tp_cum
    if curve.total_gt == 0 or not cum:
        return 0.0
    weight: dict[tuple[int, int], int] = defaultdict(int)
    best_n, best_d = 0, 1
    for j in range(len(cum) - 1, -1, -1):
        num, den = cum[j], j + 1
        if num * best_d > best_n * den:
            best_n, best_d = num, den
        below = cum[j - 1] if j else 0
        if num > below:
            weight[(best_n, best_d)] += 1
    total = sum((Fraction(w * n, d) for (n, d), w in weight.items()), Fraction(0))
    return float(total / curve.total_gt)


# -- full evaluation ---------------------------------------------------------

def _frame_worker(args):
    items, thr = args
    pooled: dict[int, list[tuple[float, bool]]] = defaultdict(list)
    n_gt: dict[int, int] = defaultdict(int)
    loc_hit = cls_hit = 0
    for gt, dets in items:
        for gcls, _ in gt:
            n_gt[gcls] += 1
        if dets:
            tp, _, _ = _greedy(gt, dets, thr, class_aware=True)
            for (dcls, conf, _), t in zip(dets, tp):
                pooled[dcls].append((conf, t))
            if gt:
                _, gidx, _ = _greedy(gt, dets, thr, class_aware=False)
                for (dcls, _, _), j in zip(dets, gidx):
                    if j is not None:
                        loc_hit += 1
                        cls_hit += dcls == gt[j][0]
    return dict(pooled), dict(n_gt), loc_hit, cls_hit


def _chunks(seq, n):
    size = -(-len(seq) // n) if seq else 0
    return [seq[i:i + size] for i in range(0, len(seq), size)] if size else []


def evaluate(annotations: Iterable[FrameAnnotation], detections: Iterable[Detection],
             iou_threshold: float = DEFAULT_IOU, conf_floor: float = 0.0,
             num_classes: int | None = None, workers: int = 1) -> EvalReport:
    """Score detections against annotations.

    The class space is ``range(num_classes)``; when omitted it is inferred as
    ``max ground-truth class id + 1``. Detections on frames absent from the
    annotations count against frames with no ground truth. ``workers > 1``
    splits frames across processes; results are merged in frame-key order and
    are identical to the single-process result.
    """
    if not 0.0 < iou_threshold <= 1.0:
        raise InputError(f"iou_threshold must be in (0, 1], got {iou_threshold}")
    gt_by_key: dict[tuple[str, int], list] = {}
    max_cls = -1
    for fa in annotations:
        key = (fa.video_id, fa.frame_index)
        if key in gt_by_key:
            raise InputError(f"duplicate annotation frame {key}")
        boxes = [(g.class_id, g.bbox.as_tuple()) for g in fa.boxes]
        for c, _ in boxes:
            max_cls = max(max_cls, c)
        gt_by_key[key] = boxes
    if num_classes is None:
        num_classes = max_cls + 1
    elif max_cls >= num_classes:
        raise InputError(f"ground-truth class {max_cls} outside num_classes={num_classes}")

    det_by_key: dict[tuple[str, int], list] = defaultdict(list)
    for d in detections:
        if d.class_id >= num_classes:
            raise InputError(f"detection class {d.class_id} unknown (num_classes={num_classes})")
        if d.confidence >= conf_floor:
            det_by_key[(d.video_id, d.frame_index)].append((d.class_id, d.confidence, d.bbox.as_tuple()))

    keys = sorted(set(gt_by_key) | set(det_by_key))
    items = [(gt_by_key.get(k, []), det_by_key.get(k, [])) for k in keys]
    if workers > 1 and len(items) > 1:
        jobs = [(c, iou_threshold) for c in _chunks(items, workers)]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_frame_worker, jobs))
    else:
        parts = [_frame_worker((items, iou_threshold))]

    pooled: dict[int, list[tuple[float, bool]]] = defaultdict(list)
    n_gt: dict[int, int] = defaultdict(int)
    loc_hit = cls_hit = 0
    for p, g, lh, ch in parts:
        for c, v in p.items():
            pooled[c].extend(v)
        for c, v in g.items():
            n_gt[c] += v
        loc_hit += lh
        cls_hit += ch

    results = []
    for c in range(num_classes):
        ranked = sorted(pooled.get(c, []), key=lambda x: -x[0])
        flags = [t for _, t in ranked]
        tp = sum(flags)
        g = n_gt.get(c, 0)
        ap = average_precision(pr_curve(flags, None, g)) if g else math.nan
        results.append(ClassResult(c, ap, tp, len(flags) - tp, g))

    with_gt = [r.ap for r in results if r.n_gt > 0]
    frame_map = math.fsum(with_gt) / len(with_gt) if with_gt else math.nan
    total_gt = sum(n_gt.values())
    loc_recall = loc_hit / total_gt if total_gt else math.nan
    cls_acc = cls_hit / loc_hit if loc_hit else math.nan
    return EvalReport(tuple(results), frame_map, loc_recall, cls_acc, iou_threshold)


# -- detections I/O ----------------------------------------------------------

def parse_detections(source: bytes | str | IO) -> list[Detection]:
    out = []
    for lineno, line in enumerate(_lines(source), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise InputError(f"invalid JSON: {e.msg}", lineno) from None
        if not isinstance(rec, dict) or not isinstance(rec.get("video_id"), str):
            raise InputError("expected an object with a string 'video_id'", lineno)
        frame = _int(rec, "frame", lineno)
        cls = _int(rec, "class", lineno)
        conf = _number(rec, "conf", lineno)
        box = _parse_box(rec, lineno)
        if frame < 0 or cls < 0:
            raise InputError("frame and class must be non-negative", lineno)
        try:
            out.append(Detection(rec["video_id"], frame, cls, conf, box))
        except InputError as e:
            raise InputError(e.reason, lineno) from None
    return out


def serialize_detections(dets: Iterable[Detection]) -> str:
    return "".join(
        json.dumps({"video_id": d.video_id, "frame": d.frame_index, "class": d.class_id,
                    "conf": d.confidence, "x_min": d.bbox.x_min, "y_min": d.bbox.y_min,
                    "x_max": d.bbox.x_max, "y_max": d.bbox.y_max}) + "\n"
        for d in dets
    )


def detections_from_annotations(frames: Iterable[FrameAnnotation], confidence: float = 1.0) -> list[Detection]:
    """Detections that exactly mirror the ground truth."""
    return [Detection(fa.video_id, fa.frame_index, g.class_id, confidence, g.bbox)
            for fa in frames for g in fa.boxes]
