"""Annotation data model, JSONL ingestion, dataset statistics, class
filtering and the class-stratified train/test split."""

from __future__ import annotations

import io
import json
import math
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import IO, Iterable, Mapping

from actdet.errors import InputError
from actdet.geom import BBox


@dataclass(frozen=True, slots=True)
class GroundTruthBox:
    class_id: int
    bbox: BBox

    def __post_init__(self):
        if isinstance(self.class_id, bool) or not isinstance(self.class_id, int) or self.class_id < 0:
            raise InputError(f"class id must be a non-negative integer, got {self.class_id!r}")


@dataclass(frozen=True, slots=True)
class FrameAnnotation:
    video_id: str
    frame_index: int
    boxes: tuple[GroundTruthBox, ...] = ()

    def __post_init__(self):
        if isinstance(self.frame_index, bool) or not isinstance(self.frame_index, int) or self.frame_index < 0:
            raise InputError(f"frame index must be a non-negative integer, got {self.frame_index!r}")
        if not isinstance(self.boxes, tuple):
            object.__setattr__(self, "boxes", tuple(self.boxes))


@dataclass(frozen=True, slots=True, order=True)
class ClipRecord:
    """A contiguous run of frames ``[start, end]`` (inclusive) of one class."""

    video_id: str
    class_id: int
    start: int
    end: int

    def __post_init__(self):
        if self.class_id < 0:
            raise InputError(f"negative class id {self.class_id}")
        if not 0 <= self.start <= self.end:
            raise InputError(f"bad clip span [{self.start}, {self.end}]")

    @property
    def n_frames(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class ClassStats:
    class_id: int
    clip_count: int
    frame_count: int


@dataclass(frozen=True)
class DatasetStats:
    rows: tuple[ClassStats, ...]
    total_clips: int
    total_frames: int

    def __getitem__(self, class_id: int) -> ClassStats:
        for row in self.rows:
            if row.class_id == class_id:
                return row
        raise KeyError(class_id)

    def frame_counts(self) -> dict[int, int]:
        return {r.class_id: r.frame_count for r in self.rows}


@dataclass(frozen=True)
class SplitResult:
    train: frozenset[ClipRecord]
    test: frozenset[ClipRecord]
    seed: int
    ratio: Fraction = field(default=Fraction(7, 10))


# -- parsing -----------------------------------------------------------------

def _lines(source) -> Iterable[str]:
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    if isinstance(source, str):
        return io.StringIO(source)
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8")


def _number(rec: Mapping, key: str, lineno: int) -> float:
    v = rec.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InputError(f"{key!r} must be a number, got {v!r}", lineno)
    return float(v)


def _int(rec: Mapping, key: str, lineno: int) -> int:
    v = rec.get(key)
    if isinstance(v, bool) or not isinstance(v, int):
        raise InputError(f"{key!r} must be an integer, got {v!r}", lineno)
    return v


def _parse_box(rec, lineno: int) -> BBox:
    coords = [_number(rec, k, lineno) for k in ("x_min", "y_min", "x_max", "y_max")]
    try:
        return BBox(*coords)
    except InputError as e:
        raise InputError(e.reason, lineno) from None


def parse_frames(source: bytes | str | IO) -> list[FrameAnnotation]:
    """Parse annotation JSONL into frames, preserving line order.

    Blank lines are skipped; line numbers in errors count them.
    """
    frames = []
    seen: set[tuple[str, int]] = set()
    for lineno, line in enumerate(_lines(source), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise InputError(f"invalid JSON: {e.msg}", lineno) from None
        if not isinstance(rec, dict):
            raise InputError("expected a JSON object", lineno)
        video_id = rec.get("video_id")
        if not isinstance(video_id, str):
            raise InputError("'video_id' must be a string", lineno)
        frame = _int(rec, "frame", lineno)
        if frame < 0:
            raise InputError(f"negative frame index {frame}", lineno)
        if (video_id, frame) in seen:
            raise InputError(f"duplicate frame ({video_id!r}, {frame})", lineno)
        seen.add((video_id, frame))
        raw_boxes = rec.get("boxes", [])
        if not isinstance(raw_boxes, list):
            raise InputError("'boxes' must be a list", lineno)
        boxes = []
        for b in raw_boxes:
            if not isinstance(b, dict):
                raise InputError("box entries must be objects", lineno)
            cls = _int(b, "class", lineno)
            if cls < 0:
                raise InputError(f"negative class id {cls}", lineno)
            boxes.append(GroundTruthBox(cls, _parse_box(b, lineno)))
        frames.append(FrameAnnotation(video_id, frame, tuple(boxes)))
    return frames


def clips_from_frames(frames: Iterable[FrameAnnotation]) -> list[ClipRecord]:
    """Group labeled frames into clips: maximal runs of consecutive frame
    indices carrying the same class within one video.

    Clips are ordered by the video's first appearance, then start, then class.
    """
    per_video: dict[str, dict[int, set[int]]] = {}
    for fa in frames:
        classes = per_video.setdefault(fa.video_id, defaultdict(set))
        for gt in fa.boxes:
            classes[gt.class_id].add(fa.frame_index)

    clips = []
    for video_id, classes in per_video.items():
        video_clips = []
        for cls, idx in classes.items():
            ordered = sorted(idx)
            start = prev = ordered[0]
            for f in ordered[1:]:
                if f != prev + 1:
                    video_clips.append(ClipRecord(video_id, cls, start, prev))
                    start = f
                prev = f
            video_clips.append(ClipRecord(video_id, cls, start, prev))
        video_clips.sort(key=lambda c: (c.start, c.class_id))
        clips.extend(video_clips)
    return clips


def parse_annotations(source: bytes | str | IO) -> tuple[list[FrameAnnotation], list[ClipRecord]]:
    frames = parse_frames(source)
    return frames, clips_from_frames(frames)


def _fmt_box(gt: GroundTruthBox) -> dict:
    b = gt.bbox
    return {"class": gt.class_id, "x_min": b.x_min, "y_min": b.y_min, "x_max": b.x_max, "y_max": b.y_max}


def serialize_annotations(frames: Iterable[FrameAnnotation]) -> str:
    out = []
    for fa in frames:
        rec = {"video_id": fa.video_id, "frame": fa.frame_index, "boxes": [_fmt_box(g) for g in fa.boxes]}
        out.append(json.dumps(rec) + "\n")
    return "".join(out)


def serialize_clips(clips: Iterable[ClipRecord]) -> str:
    return "".join(
        json.dumps({"video_id": c.video_id, "class": c.class_id, "start": c.start, "end": c.end}) + "\n"
        for c in clips
    )


def parse_clips(source: bytes | str | IO) -> list[ClipRecord]:
    clips = []
    for lineno, line in enumerate(_lines(source), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise InputError(f"invalid JSON: {e.msg}", lineno) from None
        if not isinstance(rec, dict) or not isinstance(rec.get("video_id"), str):
            raise InputError("expected an object with a string 'video_id'", lineno)
        try:
            clips.append(ClipRecord(rec["video_id"], _int(rec, "class", lineno),
                                    _int(rec, "start", lineno), _int(rec, "end", lineno)))
        except InputError as e:
            raise InputError(e.reason, lineno) from None
    return clips


# -- statistics and filtering ------------------------------------------------

def dataset_stats(clips: Iterable[ClipRecord]) -> DatasetStats:
    n_clips: Counter[int] = Counter()
    n_frames: Counter[int] = Counter()
    for c in clips:
        n_clips[c.class_id] += 1
        n_frames[c.class_id] += c.n_frames
    rows = tuple(
        ClassStats(cls, n_clips[cls], n_frames[cls])
        for cls in sorted(n_clips, key=lambda k: (-n_clips[k], k))
    )
    return DatasetStats(rows, sum(n_clips.values()), sum(n_frames.values()))


def filter_top_classes(clips: list[ClipRecord], min_clips: int) -> tuple[list[ClipRecord], dict[int, int]]:
    """Keep classes with at least ``min_clips`` clips and re-index them densely
    in descending clip-count order (ties by old id).

    Returns the surviving clips (input order) and the old -> new id table.
    """
    if min_clips < 1:
        raise InputError(f"min_clips must be >= 1, got {min_clips}")
    stats = dataset_stats(clips)
    kept = [r.class_id for r in stats.rows if r.clip_count >= min_clips]
    if not kept:
        raise InputError(f"no class has {min_clips} or more clips")
    remap = {old: new for new, old in enumerate(kept)}
    out = [ClipRecord(c.video_id, remap[c.class_id], c.start, c.end) for c in clips if c.class_id in remap]
    return out, remap


def remap_frames(frames: Iterable[FrameAnnotation], remap: Mapping[int, int]) -> list[FrameAnnotation]:
    """Apply a class remap to frame annotations, dropping boxes of removed classes.

    Frames left without boxes are kept (unlabeled frames are legal).
    """
    out = []
    for fa in frames:
        boxes = tuple(GroundTruthBox(remap[g.class_id], g.bbox) for g in fa.boxes if g.class_id in remap)
        out.append(FrameAnnotation(fa.video_id, fa.frame_index, boxes))
    return out


# -- split -------------------------------------------------------------------

def parse_ratio(ratio) -> Fraction:
    """Accept 0.7, Fraction(7, 10) or a ``"7:3"`` string."""
    if isinstance(ratio, Fraction):
        r = ratio
    elif isinstance(ratio, str) and ":" in ratio:
        a, b = ratio.split(":", 1)
        try:
            a, b = Fraction(a.strip()), Fraction(b.strip())
        except ValueError:
            raise InputError(f"bad ratio {ratio!r}") from None
        if a < 0 or b < 0 or a + b == 0:
            raise InputError(f"bad ratio {ratio!r}")
        r = a / (a + b)
    else:
        try:
            # via str() so 0.7 means 7/10, not its binary approximation
            r = Fraction(str(ratio))
        except ValueError:
            raise InputError(f"bad ratio {ratio!r}") from None
    if not 0 < r < 1:
        raise InputError(f"ratio must be strictly between 0 and 1, got {ratio!r}")
    return r


def train_count(n: int, ratio: Fraction) -> int:
    """round-half-up(ratio * n), clamped to [1, n - 1]."""
    k = math.floor(ratio * n + Fraction(1, 2))
    return min(max(k, 1), n - 1)


def stratified_split(clips: Iterable[ClipRecord], ratio=Fraction(7, 10), seed: int = 42) -> SplitResult:
    r = parse_ratio(ratio)
    by_class: dict[int, list[ClipRecord]] = defaultdict(list)
    for c in clips:
        by_class[c.class_id].append(c)
    short = sorted(cls for cls, cs in by_class.items() if len(cs) < 2)
    if short:
        raise InputError(f"class {short[0]} has fewer than 2 clips; cannot place it in both train and test")

    train, test = set(), set()
    for cls in sorted(by_class):
        members = sorted(by_class[cls])
        # string seeds hash deterministically across runs and platforms
        random.Random(f"{seed}:{cls}").shuffle(members)
        k = train_count(len(members), r)
        train.update(members[:k])
        test.update(members[k:])
    return SplitResult(frozenset(train), frozenset(test), seed, r)
