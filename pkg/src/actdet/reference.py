"""Agot action statistics (top-24 labeled actions) and synthetic fixtures
shaped to them.

The Agot footage is private; only per-action clip and frame counts are
public. ``agot_clips`` builds ClipRecords that reproduce those counts so
the preprocessing pipeline can be exercised end to end.
"""

from __future__ import annotations

from actdet.annot import ClipRecord, FrameAnnotation, GroundTruthBox
from actdet.geom import BBox

# (label, clips, frames), ranked by clip count; action index = position + 1
AGOT_TOP24: tuple[tuple[str, int, int], ...] = (
    ("Pick up from bin with tong or scooper", 149, 7187),
    ("Put item into meal using tongs", 136, 5084),
    ("Put tongs or scooper back in bin", 89, 1015),
    ("Operating POS", 74, 9414),
    ("Put item into meal using hands", 66, 3234),
    ("Pick up from bin with hands", 55, 2538),
    ("Pick up sauce", 52, 954),
    ("Put sauce down", 41, 905),
    ("Clean counter", 36, 4959),
    ("Squirt sauce", 31, 2782),
    ("Put roll into roll cut machine", 30, 1327),
    ("Place cut roll into boat", 30, 7734),
    ("Pickup cut roll from roll machine", 29, 4687),
    ("Operating sushi roll cutter", 28, 3215),
    ("Roll a sushi roll", 25, 10407),
    ("Pick up a drink", 22, 593),
    ("Hand item to customer", 21, 736),
    ("Put gloves on", 20, 3195),
    ("Handing credit card", 18, 514),
    ("Put lid on roll", 15, 845),
    ("Put drink down", 14, 403),
    ("Operating fivestar", 12, 2209),
    ("Using a cell phone", 10, 15239),
    ("Inserting chip of credit card", 10, 838),
)

# 38 labeled actions in total; the other 14 have fewer than 10 clips.
# Their exact counts are unpublished, these are placeholders below threshold.
AGOT_MINOR_CLIPS: tuple[int, ...] = (9, 9, 8, 7, 7, 6, 5, 4, 4, 3, 3, 2, 2, 1)


def _spans(n_clips: int, n_frames: int) -> list[int]:
    base, extra = divmod(n_frames, n_clips)
    return [base + (1 if i < extra else 0) for i in range(n_clips)]


def agot_clips(include_minor: bool = False) -> list[ClipRecord]:
    """One video per clip, frames numbered from 0; class ids follow table order."""
    rows = [(clips, frames) for _, clips, frames in AGOT_TOP24]
    if include_minor:
        rows += [(c, 3 * c) for c in AGOT_MINOR_CLIPS]
    out = []
    for class_id, (n_clips, n_frames) in enumerate(rows):
        for k, length in enumerate(_spans(n_clips, n_frames)):
            out.append(ClipRecord(f"c{class_id:02d}_v{k:03d}", class_id, 0, length - 1))
    return out


def agot_labels(include_minor: bool = False) -> dict[int, str]:
    labels = {i: row[0] for i, row in enumerate(AGOT_TOP24)}
    if include_minor:
        for j in range(len(AGOT_MINOR_CLIPS)):
            labels[len(AGOT_TOP24) + j] = f"Minor action {j + 1}"
    return labels


def clips_to_frames(clips: list[ClipRecord], box: BBox | None = None) -> list[FrameAnnotation]:
    """Expand clips into per-frame annotations carrying one fixed box each.

    Clips of the same video must not overlap in time.
    """
    box = box or BBox(10.0, 20.0, 110.0, 220.0)
    frames = []
    for clip in clips:
        for f in range(clip.start, clip.end + 1):
            frames.append(FrameAnnotation(clip.video_id, f, (GroundTruthBox(clip.class_id, box),)))
    return frames
