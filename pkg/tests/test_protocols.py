import math
import random

import pytest

from rrnn.errors import DataError, ShapeError
from rrnn.linalg import Vector
from rrnn.protocols import (
    FRONTAL_INDEX,
    POSE_ANGLES,
    PoseGrid,
    SubjectPoseSet,
    VideoTrack,
    build_pose_test_sequence,
    build_pose_training_sample,
    build_video_clips,
    fit_normalizer,
    pose_target_path,
    synth_pose_dataset,
    synth_video_dataset,
)

GRID = PoseGrid()


def angles(path):
    return [POSE_ANGLES[i] for i in path]


class TestPoseTargetPath:
    def test_minus_45(self):
        assert angles(pose_target_path(0)) == [-30, -15, 0, 0]

    def test_frontal(self):
        assert angles(pose_target_path(3)) == [0, 0, 0, 0]

    def test_plus_30(self):
        assert angles(pose_target_path(5)) == [15, 0, 0, 0]

    def test_all_poses_shape(self):
        for p in range(7):
            path = pose_target_path(p)
            assert len(path) == 4
            assert path[-1] == FRONTAL_INDEX
            cur = p
            for nxt in path:
                assert abs(nxt - cur) == 1 or nxt == FRONTAL_INDEX == cur
                cur = nxt

    def test_mirror_symmetry(self):
        for k in range(1, 4):
            left = angles(pose_target_path(FRONTAL_INDEX - k))
            right = angles(pose_target_path(FRONTAL_INDEX + k))
            assert right == [-a for a in left]

    @pytest.mark.parametrize("bad", [-1, 7, 100])
    def test_invalid_pose_rejected(self, bad):
        with pytest.raises(DataError):
            pose_target_path(bad)


def make_pose_set(rng, d=4, subject_id=7):
    feats = {p: Vector([rng.uniform(-1, 1) for _ in range(d)]) for p in range(7)}
    return SubjectPoseSet(subject_id=subject_id, features=feats)


class TestBuildPoseTrainingSample:
    def test_minus_45_layout(self):
        rng = random.Random(0)
        ps = make_pose_set(rng)
        s = build_pose_training_sample(ps, 0)
        assert len(s.inputs) == 4
        assert all(list(x.data) == list(s.inputs[0].data) for x in s.inputs)
        assert list(s.inputs[0].data) == list(ps.features[0].data)
        want = [ps.features[1], ps.features[2], ps.features[3], ps.features[3]]
        assert [list(t.data) for t in s.targets] == [list(w.data) for w in want]
        assert s.label == 7

    def test_frontal_input_all_frontal_targets(self):
        rng = random.Random(1)
        ps = make_pose_set(rng)
        s = build_pose_training_sample(ps, 3)
        frontal = list(ps.features[3].data)
        assert [list(t.data) for t in s.targets] == [frontal] * 4
        # mean of identical targets is that target
        assert list(s.global_target.data) == pytest.approx(frontal, abs=1e-15)

    def test_missing_pose_named(self):
        rng = random.Random(2)
        ps = make_pose_set(rng)
        del ps.features[1]
        with pytest.raises(DataError, match="-30"):
            build_pose_training_sample(ps, 0)

    def test_global_target_is_target_mean(self):
        rng = random.Random(3)
        ps = make_pose_set(rng, d=3)
        s = build_pose_training_sample(ps, 6)
        for i in range(3):
            want = sum(t.data[i] for t in s.targets) / 4
            assert s.global_target.data[i] == pytest.approx(want, abs=1e-15)

    def test_normalizer_applied(self):
        rng = random.Random(4)
        ps = make_pose_set(rng, d=5)
        norm = fit_normalizer([ps.features[p] for p in range(7)])
        s = build_pose_training_sample(ps, 2, norm=norm)
        for x in s.inputs + s.targets:
            assert all(-0.9 <= v <= 0.9 for v in x.data)


class TestBuildPoseTestSequence:
    def test_shape(self):
        s = build_pose_test_sequence(Vector([0.1, 0.2]), sample_id="q")
        assert len(s.inputs) == 4
        assert s.targets is None and s.global_target is None and s.label is None
        assert s.sample_id == "q"
        assert all(list(x.data) == [0.1, 0.2] for x in s.inputs)

    def test_out_of_range_clamped(self):
        norm = fit_normalizer([Vector([0.0]), Vector([10.0])])
        s = build_pose_test_sequence(Vector([20.0]), norm=norm)
        assert s.inputs[0].data[0] == 0.9
        s = build_pose_test_sequence(Vector([-20.0]), norm=norm)
        assert s.inputs[0].data[0] == -0.9


class TestNormalizer:
    def test_affine_hand_values(self):
        norm = fit_normalizer([Vector([0.0]), Vector([10.0])])
        assert norm.apply(Vector([5.0])).data[0] == pytest.approx(0.0, abs=1e-15)
        assert norm.apply(Vector([10.0])).data[0] == pytest.approx(0.9, abs=1e-15)
        assert norm.apply(Vector([0.0])).data[0] == pytest.approx(-0.9, abs=1e-15)

    def test_single_feature_maps_to_zero(self):
        norm = fit_normalizer([Vector([3.0, -2.0])])
        out = norm.apply(Vector([3.0, -2.0]))
        assert list(out.data) == [0.0, 0.0]

    def test_constant_dim_inverts_to_value(self):
        norm = fit_normalizer([Vector([3.0, 0.0]), Vector([3.0, 1.0])])
        assert norm.invert(norm.apply(Vector([3.0, 0.5]))).data[0] == 3.0

    def test_roundtrip_property(self):
        rng = random.Random(5)
        for _ in range(50):
            d = rng.randint(1, 6)
            feats = [
                Vector([rng.uniform(-5, 5) for _ in range(d)]) for _ in range(8)
            ]
            norm = fit_normalizer(feats)
            for f in feats:
                back = norm.invert(norm.apply(f))
                for a, b in zip(back.data, f.data):
                    assert abs(a - b) <= 1e-12

    def test_empty_rejected(self):
        with pytest.raises(DataError):
            fit_normalizer([])

    def test_mixed_dims_rejected(self):
        with pytest.raises(ShapeError):
            fit_normalizer([Vector([1.0]), Vector([1.0, 2.0])])


class TestBuildVideoClips:
    def track(self, n, d=3, sid=1, seed=0):
        rng = random.Random(seed)
        return VideoTrack(
            subject_id=sid,
            frames=[Vector([rng.uniform(-1, 1) for _ in range(d)]) for _ in range(n)],
        )

    def test_remainder_kept_at_half(self):
        clips = build_video_clips(self.track(25), clip_len=10)
        assert [len(c.inputs) for c in clips] == [10, 10, 5]

    def test_remainder_dropped_below_half(self):
        clips = build_video_clips(self.track(23), clip_len=10)
        assert [len(c.inputs) for c in clips] == [10, 10]

    def test_short_track_kept_whole(self):
        clips = build_video_clips(self.track(7), clip_len=10)
        assert [len(c.inputs) for c in clips] == [7]

    def test_identical_frames_targets_equal_inputs(self):
        f = Vector([0.25, -0.5])
        t = VideoTrack(subject_id=2, frames=[f.copy() for _ in range(10)])
        clips = build_video_clips(t, clip_len=10)
        (c,) = clips
        for x, y in zip(c.inputs, c.targets):
            assert list(x.data) == pytest.approx(list(y.data), abs=1e-15)

    def test_targets_are_clip_mean_and_no_global(self):
        t = self.track(10)
        (c,) = build_video_clips(t, clip_len=10)
        assert c.global_target is None
        assert c.label == 1
        for i in range(3):
            want = sum(f.data[i] for f in c.inputs) / 10
            for tg in c.targets:
                assert tg.data[i] == pytest.approx(want, abs=1e-15)

    def test_coverage_in_order(self):
        t = self.track(30)
        clips = build_video_clips(t, clip_len=10)
        concat = [list(x.data) for c in clips for x in c.inputs]
        assert concat == [list(f.data) for f in t.frames]

    def test_each_frame_used_at_most_once(self):
        t = self.track(23)
        clips = build_video_clips(t, clip_len=10)
        used = sum(len(c.inputs) for c in clips)
        assert used == 20
        concat = [list(x.data) for c in clips for x in c.inputs]
        assert concat == [list(f.data) for f in t.frames[:20]]

    def test_empty_track_rejected(self):
        with pytest.raises(DataError):
            VideoTrack(subject_id=0, frames=[])

    def test_bad_clip_len_rejected(self):
        with pytest.raises(DataError):
            build_video_clips(self.track(5), clip_len=0)

    def test_sample_ids_distinct(self):
        clips = build_video_clips(self.track(30), clip_len=10)
        ids = [c.sample_id for c in clips]
        assert len(set(ids)) == 3


class TestSynthPose:
    def test_deterministic(self):
        a = synth_pose_dataset(6, 4, 0.1, seed=9)
        b = synth_pose_dataset(6, 4, 0.1, seed=9)
        for sa, sb in zip(a.subjects(), b.subjects()):
            assert sa.subject_id == sb.subject_id
            for p in range(7):
                assert list(sa.features[p].data) == list(sb.features[p].data)

    def test_split_sizes(self):
        ds = synth_pose_dataset(7, 4, 0.0, seed=1)
        assert [s.subject_id for s in ds.train] == [0, 1, 2, 3]
        assert [s.subject_id for s in ds.test] == [4, 5, 6]

    def test_all_poses_present(self):
        ds = synth_pose_dataset(4, 5, 0.05, seed=2)
        for s in ds.subjects():
            assert sorted(s.features) == list(range(7))
            assert all(len(s.features[p]) == 5 for p in range(7))

    def test_noiseless_frontal_raw_knn_is_perfect(self):
        ds = synth_pose_dataset(10, 8, 0.0, seed=3)
        gallery = [(s.features[3], s.subject_id) for s in ds.test]
        for s in ds.test:
            probe = s.features[3]
            best = min(
                gallery,
                key=lambda gl: sum(
                    (a - b) ** 2 for a, b in zip(probe.data, gl[0].data)
                ),
            )
            assert best[1] == s.subject_id

    def test_param_validation(self):
        with pytest.raises(DataError):
            synth_pose_dataset(3, 8, 0.1, seed=0)
        with pytest.raises(DataError):
            synth_pose_dataset(8, 3, 0.1, seed=0)
        with pytest.raises(DataError):
            synth_pose_dataset(8, 8, -0.1, seed=0)


class TestSynthVideo:
    def test_counts_and_lengths(self):
        tracks = synth_video_dataset(4, 3, 25, 6, 0.05, seed=11)
        assert len(tracks) == 12
        assert all(len(t.frames) == 25 for t in tracks)
        assert [t.subject_id for t in tracks] == [0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3]

    def test_deterministic(self):
        a = synth_video_dataset(3, 2, 5, 4, 0.1, seed=12)
        b = synth_video_dataset(3, 2, 5, 4, 0.1, seed=12)
        for ta, tb in zip(a, b):
            for fa, fb in zip(ta.frames, tb.frames):
                assert list(fa.data) == list(fb.data)

    def test_single_frame_tracks(self):
        tracks = synth_video_dataset(2, 1, 1, 4, 0.0, seed=13)
        assert all(len(t.frames) == 1 for t in tracks)

    def test_frozen_walk_gives_constant_track(self):
        tracks = synth_video_dataset(2, 2, 6, 4, 0.0, seed=14, walk_step=0.0)
        for t in tracks:
            first = list(t.frames[0].data)
            assert all(list(f.data) == first for f in t.frames)

    def test_param_validation(self):
        with pytest.raises(DataError):
            synth_video_dataset(1, 2, 5, 4, 0.1, seed=0)
        with pytest.raises(DataError):
            synth_video_dataset(3, 0, 5, 4, 0.1, seed=0)
        with pytest.raises(DataError):
            synth_video_dataset(3, 2, 0, 4, 0.1, seed=0)
