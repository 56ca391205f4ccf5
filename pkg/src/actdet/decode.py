"""Decoding of grid-shaped anchor detector outputs into Detections, and
per-class greedy non-maximum suppression.

Binary grid format: a 20-byte header (``b"GRID"`` then S_w, S_h, A, C as
little-endian uint32) followed by S_h * S_w * A * (5 + C) little-endian
float32 values. Cells are row-major (row j = y index, column i = x index),
anchors vary fastest within a cell, and each anchor slot holds
``t_x, t_y, t_w, t_h, objectness, class logits...``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from actdet.errors import InputError
from actdet.evaluation import Detection
from actdet.geom import BBox, iou

MAGIC = b"GRID"
HEADER = struct.Struct("<4sIIII")
DEFAULT_NMS_IOU = 0.45


@dataclass(frozen=True)
class GridOutput:
    """``data`` has shape (S_h, S_w, A, 5 + C)."""

    data: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 4 or d.shape[3] < 6:
            raise InputError(f"grid data must have shape (S_h, S_w, A, 5 + C) with C >= 1, got {d.shape}")
        if not np.all(np.isfinite(d)):
            raise InputError("grid data contains non-finite values")
        object.__setattr__(self, "data", d)

    @property
    def s_w(self) -> int:
        return self.data.shape[1]

    @property
    def s_h(self) -> int:
        return self.data.shape[0]

    @property
    def num_anchors(self) -> int:
        return self.data.shape[2]

    @property
    def num_classes(self) -> int:
        return self.data.shape[3] - 5

    def to_bytes(self) -> bytes:
        head = HEADER.pack(MAGIC, self.s_w, self.s_h, self.num_anchors, self.num_classes)
        return head + self.data.astype("<f4").tobytes()

    @classmethod
    def from_bytes(cls, buf: bytes) -> GridOutput:
        if len(buf) < HEADER.size:
            raise InputError("grid file shorter than its header")
        magic, s_w, s_h, a, c = HEADER.unpack_from(buf)
        if magic != MAGIC:
            raise InputError(f"bad grid magic {magic!r}")
        expected = s_w * s_h * a * (5 + c)
        body = buf[HEADER.size:]
        if len(body) != 4 * expected:
            raise InputError(f"grid payload has {len(body)} bytes, header implies {4 * expected}")
        data = np.frombuffer(body, dtype="<f4").reshape(s_h, s_w, a, 5 + c)
        return cls(data)


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def decode_grid(g: GridOutput, anchors, image_w: float, image_h: float, conf_floor: float = 0.0,
                video_id: str = "", frame_index: int = 0) -> list[Detection]:
    """One detection per (cell, anchor) at its argmax class.

    ``anchors`` is an AnchorSet or an (A, 2) array of normalized (w, h).
    Confidence is sigmoid(objectness) * softmax(class logits)[argmax]; boxes
    are clipped to the image.
    """
    A = np.asarray(getattr(anchors, "centroids", anchors), dtype=float)
    if A.shape != (g.num_anchors, 2):
        raise InputError(f"grid has {g.num_anchors} anchors, anchor set has shape {A.shape}")
    if not 0.0 <= conf_floor <= 1.0:
        raise InputError("conf_floor must be in [0, 1]")
    if image_w <= 0 or image_h <= 0:
        raise InputError("image size must be positive")

    d = g.data
    jj, ii = np.meshgrid(np.arange(g.s_h), np.arange(g.s_w), indexing="ij")
    cx = (ii[..., None] + _sigmoid(d[..., 0])) / g.s_w * image_w
    cy = (jj[..., None] + _sigmoid(d[..., 1])) / g.s_h * image_h
    with np.errstate(over="ignore"):
        bw = A[:, 0] * np.exp(d[..., 2]) * image_w
        bh = A[:, 1] * np.exp(d[..., 3]) * image_h
    logits = d[..., 5:]
    z = np.exp(logits - logits.max(axis=-1, keepdims=True))
    cls = np.argmax(logits, axis=-1)
    p_cls = np.take_along_axis(z, cls[..., None], axis=-1)[..., 0] / z.sum(axis=-1)
    conf = _sigmoid(d[..., 4]) * p_cls

    x0 = np.clip(cx - bw / 2, 0.0, image_w)
    x1 = np.clip(cx + bw / 2, 0.0, image_w)
    y0 = np.clip(cy - bh / 2, 0.0, image_h)
    y1 = np.clip(cy + bh / 2, 0.0, image_h)

    out = []
    for j, i, a in zip(*np.nonzero(conf >= conf_floor)):
        c = min(max(float(conf[j, i, a]), 0.0), 1.0)
        box = (float(x0[j, i, a]), float(y0[j, i, a]), float(x1[j, i, a]), float(y1[j, i, a]))
        if not (box[0] < box[2] and box[1] < box[3]):
            continue  # size underflowed to zero
        out.append(Detection(video_id, frame_index, int(cls[j, i, a]), c, BBox(*box)))
    return out


def nms(dets: Sequence[Detection], iou_threshold: float = DEFAULT_NMS_IOU) -> list[Detection]:
    """Per-class greedy suppression. Kept detections stay in input order."""
    order = sorted(range(len(dets)), key=lambda i: -dets[i].confidence)
    kept_by_class: dict[int, list[Detection]] = {}
    keep = set()
    for i in order:
        d = dets[i]
        kept = kept_by_class.setdefault(d.class_id, [])
        if all(iou(d.bbox, k.bbox) < iou_threshold for k in kept):
            kept.append(d)
            keep.add(i)
    return [d for i, d in enumerate(dets) if i in keep]
