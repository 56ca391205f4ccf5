import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from actdet import reference
from actdet.annot import (
    ClipRecord,
    FrameAnnotation,
    GroundTruthBox,
    clips_from_frames,
    dataset_stats,
    filter_top_classes,
    parse_annotations,
    parse_clips,
    parse_frames,
    parse_ratio,
    remap_frames,
    serialize_annotations,
    serialize_clips,
    stratified_split,
    train_count,
)
from actdet.errors import InputError
from actdet.geom import BBox


def line(video, frame, *boxes):
    return json.dumps({"video_id": video, "frame": frame, "boxes": [
        {"class": c, "x_min": b[0], "y_min": b[1], "x_max": b[2], "y_max": b[3]} for c, b in boxes
    ]})


BOX = (1.0, 2.0, 30.5, 40.0)


class TestParse:
    def test_three_lines_one_box_each(self):
        text = "\n".join(line("v", f, (0, BOX)) for f in range(3)) + "\n"
        frames, clips = parse_annotations(text.encode())
        assert [f.frame_index for f in frames] == [0, 1, 2]
        assert all(len(f.boxes) == 1 for f in frames)
        assert clips == [ClipRecord("v", 0, 0, 2)]

    def test_gap_splits_clips(self):
        # frames 0-2 and 5-6 carry class 5; frame 3 is unlabeled, frame 4 is absent
        text = "\n".join([
            line("v", 0, (5, BOX)), line("v", 1, (5, BOX)), line("v", 2, (5, BOX)),
            line("v", 3), line("v", 5, (5, BOX)), line("v", 6, (5, BOX)),
        ])
        _, clips = parse_annotations(text)
        assert clips == [ClipRecord("v", 5, 0, 2), ClipRecord("v", 5, 5, 6)]

    def test_overlapping_classes_and_videos(self):
        text = "\n".join([
            line("b", 0, (1, BOX)), line("a", 0, (0, BOX), (1, BOX)), line("a", 1, (0, BOX)),
            line("b", 1, (1, BOX)),
        ])
        _, clips = parse_annotations(text)
        assert clips == [ClipRecord("b", 1, 0, 1), ClipRecord("a", 0, 0, 1), ClipRecord("a", 1, 0, 0)]

    def test_out_of_order_lines_preserved(self):
        text = "\n".join([line("v", 2, (0, BOX)), line("v", 0, (0, BOX)), line("v", 1, (0, BOX))])
        frames, clips = parse_annotations(text)
        assert [f.frame_index for f in frames] == [2, 0, 1]
        assert clips == [ClipRecord("v", 0, 0, 2)]

    def test_inverted_box_reports_line(self):
        text = line("v", 0, (0, BOX)) + "\n" + line("v", 1, (0, (10, 0, 5, 5)))
        with pytest.raises(InputError) as e:
            parse_annotations(text)
        assert e.value.line == 2
        assert "x_min" in str(e.value)

    def test_duplicate_frame(self):
        text = line("v", 0) + "\n" + line("v", 0)
        with pytest.raises(InputError, match="duplicate") as e:
            parse_annotations(text)
        assert e.value.line == 2

    @pytest.mark.parametrize("bad", [
        "not json",
        "[1, 2]",
        '{"video_id": 3, "frame": 0, "boxes": []}',
        '{"video_id": "v", "frame": -1, "boxes": []}',
        '{"video_id": "v", "frame": 1.5, "boxes": []}',
        '{"video_id": "v", "frame": 0, "boxes": [{"class": -1, "x_min": 0, "y_min": 0, "x_max": 1, "y_max": 1}]}',
        '{"video_id": "v", "frame": 0, "boxes": [{"class": 0, "x_min": "a", "y_min": 0, "x_max": 1, "y_max": 1}]}',
        '{"video_id": "v", "frame": 0, "boxes": {}}',
    ])
    def test_malformed_lines(self, bad):
        with pytest.raises(InputError) as e:
            parse_frames(line("ok", 0) + "\n" + bad)
        assert e.value.line == 2

    def test_empty_input(self):
        assert parse_annotations(b"") == ([], [])

    def test_file_like_binary(self, tmp_path):
        p = tmp_path / "a.jsonl"
        p.write_text(line("v", 0, (0, BOX)) + "\n")
        with open(p, "rb") as fh:
            frames = parse_frames(fh)
        assert frames[0].boxes[0].bbox == BBox(*BOX)


frame_strategy = st.builds(
    FrameAnnotation,
    st.sampled_from(["a", "b", "vid-3"]),
    st.integers(0, 50),
    st.lists(st.builds(
        GroundTruthBox, st.integers(0, 5),
        st.tuples(st.floats(0, 100), st.floats(0, 100), st.floats(0.01, 50), st.floats(0.01, 50)).map(
            lambda t: BBox(t[0], t[1], t[0] + t[2], t[1] + t[3]))),
        max_size=3).map(tuple),
)


@given(st.lists(frame_strategy, max_size=20, unique_by=lambda f: (f.video_id, f.frame_index)))
def test_serialize_parse_round_trip(frames):
    text = serialize_annotations(frames)
    assert parse_frames(text) == frames
    assert serialize_annotations(parse_frames(text)) == text


def test_clip_round_trip():
    clips = [ClipRecord("v", 1, 3, 9), ClipRecord("w", 0, 0, 0)]
    assert parse_clips(serialize_clips(clips)) == clips


class TestStats:
    def test_counts(self):
        clips = [ClipRecord("v", 7, 0, 3), ClipRecord("v", 7, 10, 12), ClipRecord("w", 7, 0, 2)]
        s = dataset_stats(clips)
        assert s[7].clip_count == 3 and s[7].frame_count == 10

    def test_empty(self):
        s = dataset_stats([])
        assert s.rows == () and s.total_clips == 0 and s.total_frames == 0

    def test_ties_broken_by_class_id(self):
        clips = [ClipRecord("v", 3, 0, 0), ClipRecord("v", 1, 2, 2), ClipRecord("v", 2, 4, 4), ClipRecord("w", 2, 0, 0)]
        assert [r.class_id for r in dataset_stats(clips).rows] == [2, 1, 3]

    def test_agot_first_row(self, agot_clips):
        s = dataset_stats(agot_clips)
        first = s.rows[0]
        assert (first.class_id, first.clip_count, first.frame_count) == (0, 149, 7187)
        for i, (_, n_clips, n_frames) in enumerate(reference.AGOT_TOP24):
            assert (s[i].clip_count, s[i].frame_count) == (n_clips, n_frames)

    @given(st.lists(st.tuples(st.sampled_from("abc"), st.integers(0, 4), st.integers(0, 5), st.integers(0, 5)).map(
        lambda t: ClipRecord(t[0], t[1], t[2], t[2] + t[3])), max_size=30))
    def test_totals_equal_row_sums(self, clips):
        s = dataset_stats(clips)
        assert s.total_clips == sum(r.clip_count for r in s.rows) == len(clips)
        assert s.total_frames == sum(r.frame_count for r in s.rows)


class TestFilter:
    @staticmethod
    def _clips(counts):
        return [ClipRecord(f"{cls}{k}", cls, 0, 0) for cls, n in counts.items() for k in range(n)]

    def test_threshold(self):
        out, remap = filter_top_classes(self._clips({7: 12, 3: 9}), 10)
        assert remap == {7: 0}
        assert {c.class_id for c in out} == {0} and len(out) == 12

    def test_threshold_inclusive(self):
        _, remap = filter_top_classes(self._clips({4: 10}), 10)
        assert remap == {4: 0}

    def test_dense_reindex_by_count(self):
        _, remap = filter_top_classes(self._clips({0: 11, 1: 30, 2: 20, 3: 2}), 10)
        assert remap == {1: 0, 2: 1, 0: 2}

    def test_all_filtered(self):
        with pytest.raises(InputError):
            filter_top_classes(self._clips({0: 3}), 10)

    def test_bad_min_clips(self):
        with pytest.raises(InputError):
            filter_top_classes(self._clips({0: 3}), 0)

    def test_agot_38_to_24(self, agot_clips_38):
        assert len(dataset_stats(agot_clips_38).rows) == 38
        out, remap = filter_top_classes(agot_clips_38, 10)
        assert len(remap) == 24
        assert remap == {i: i for i in range(24)}
        assert len(out) == sum(n for _, n, _ in reference.AGOT_TOP24)

    def test_remap_frames_drops_filtered_boxes(self):
        b = BBox(0, 0, 1, 1)
        frames = [FrameAnnotation("v", 0, (GroundTruthBox(3, b), GroundTruthBox(5, b)))]
        assert remap_frames(frames, {5: 0}) == [FrameAnnotation("v", 0, (GroundTruthBox(0, b),))]


class TestSplit:
    @staticmethod
    def _one_class(n):
        return [ClipRecord(f"v{k}", 0, 0, 0) for k in range(n)]

    def test_ten_clips(self):
        r = stratified_split(self._one_class(10), 0.7, 1)
        assert (len(r.train), len(r.test)) == (7, 3)

    def test_two_clips_clamped(self):
        r = stratified_split(self._one_class(2), 0.7, 1)
        assert (len(r.train), len(r.test)) == (1, 1)

    def test_singleton_class_rejected(self):
        clips = self._one_class(5) + [ClipRecord("x", 9, 0, 0)]
        with pytest.raises(InputError, match="class 9"):
            stratified_split(clips, 0.7, 1)

    @pytest.mark.parametrize("ratio", [0, 1, 1.5, -0.1, "x", "3:0"])
    def test_bad_ratio(self, ratio):
        with pytest.raises(InputError):
            stratified_split(self._one_class(5), ratio, 1)

    def test_ratio_forms(self):
        assert parse_ratio("7:3") == parse_ratio(0.7) == parse_ratio(Fraction(7, 10)) == Fraction(7, 10)

    @pytest.mark.parametrize("n, expected", [(2, 1), (3, 2), (5, 4), (10, 7), (15, 11), (149, 104)])
    def test_train_count_round_half_up(self, n, expected):
        # 0.7 * 5 = 3.5 rounds up to 4; 0.7 * 15 = 10.5 rounds up to 11
        assert train_count(n, Fraction(7, 10)) == expected

    def test_agot_constraints(self, agot_clips):
        r = stratified_split(agot_clips, "7:3", 42)
        assert r.train.isdisjoint(r.test)
        assert r.train | r.test == set(agot_clips)
        for cls, (_, n, _) in enumerate(reference.AGOT_TOP24):
            n_train = sum(1 for c in r.train if c.class_id == cls)
            assert 1 <= n_train < n
            assert abs(n_train - 0.7 * n) <= 1

    def test_seed_changes_membership_not_counts(self, agot_clips):
        a, b = stratified_split(agot_clips, 0.7, 1), stratified_split(agot_clips, 0.7, 2)
        assert a.train != b.train and len(a.train) == len(b.train)

    def test_deterministic_and_order_independent(self, agot_clips):
        a = stratified_split(agot_clips, 0.7, 5)
        b = stratified_split(list(reversed(agot_clips)), 0.7, 5)
        assert a == b


@settings(max_examples=60)
@given(st.dictionaries(st.integers(0, 6), st.integers(2, 15), min_size=1),
       st.floats(0.05, 0.95), st.integers(0, 2**31))
def test_split_invariants(counts, ratio, seed):
    clips = [ClipRecord(f"c{c}_{k}", c, 0, k) for c, n in counts.items() for k in range(n)]
    r = stratified_split(clips, ratio, seed)
    assert r.train.isdisjoint(r.test)
    assert r.train | r.test == set(clips)
    for c in counts:
        assert any(x.class_id == c for x in r.train)
        assert any(x.class_id == c for x in r.test)
    assert stratified_split(clips, ratio, seed) == r
