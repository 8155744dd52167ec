"""Sequence construction for the two tasks, plus synthetic data generators.

The pose task turns one still image into a virtual sequence whose decoding
targets walk the pose toward frontal in 15-degree steps.  The video task
cuts a track into clips whose shared decoding target is the clip mean.
Features are affinely normalized into [-0.9, 0.9] so the tanh decoder can
reach them without saturating.
"""

import math
import random
from dataclasses import dataclass, field

from .errors import DataError, ShapeError
from .linalg import Vector, mean_of
from .model import SequenceSample

POSE_ANGLES = (-45, -30, -15, 0, 15, 30, 45)
FRONTAL_INDEX = 3
# longest walk to frontal (3 grid steps from +-45) plus the terminal frontal
PATH_LEN = 4

NORM_LIMIT = 0.9


@dataclass(frozen=True)
class PoseGrid:
    poses: tuple = POSE_ANGLES
    frontal_index: int = FRONTAL_INDEX


@dataclass
class SubjectPoseSet:
    """One still image feature per pose for one subject."""

    subject_id: int
    features: dict  # pose index -> Vector


@dataclass
class VideoTrack:
    subject_id: int
    frames: list  # of Vector

    def __post_init__(self):
        if not self.frames:
            raise DataError("a video track needs at least one frame")


class Normalizer:
    """Per-dimension affine map of the training range onto [-0.9, 0.9].

    Constant dimensions map to 0; out-of-range values at apply time are
    clamped to the edge, since the decoder cannot reach beyond (-1, 1).
    """

    def __init__(self, lo, hi):
        if len(lo) != len(hi):
            raise ShapeError("lo and hi must have the same length")
        for l, h in zip(lo.data, hi.data):
            if h < l:
                raise DataError("normalizer max must be >= min per dimension")
        self.lo = lo
        self.hi = hi

    def __len__(self):
        return len(self.lo)

    def apply(self, v: Vector) -> Vector:
        if len(v) != len(self.lo):
            raise ShapeError(f"feature has {len(v)} dims, normalizer has {len(self.lo)}")
        out = Vector.zeros(len(v))
        for i in range(len(v)):
            lo, hi = self.lo.data[i], self.hi.data[i]
            if hi == lo:
                y = 0.0
            else:
                y = (v.data[i] - lo) * (2.0 * NORM_LIMIT / (hi - lo)) - NORM_LIMIT
                if y > NORM_LIMIT:
                    y = NORM_LIMIT
                elif y < -NORM_LIMIT:
                    y = -NORM_LIMIT
            out.data[i] = y
        return out

    def invert(self, v: Vector) -> Vector:
        if len(v) != len(self.lo):
            raise ShapeError(f"feature has {len(v)} dims, normalizer has {len(self.lo)}")
        out = Vector.zeros(len(v))
        for i in range(len(v)):
            lo, hi = self.lo.data[i], self.hi.data[i]
            if hi == lo:
                out.data[i] = lo
            else:
                out.data[i] = (v.data[i] + NORM_LIMIT) * ((hi - lo) / (2.0 * NORM_LIMIT)) + lo
        return out


def fit_normalizer(training_features) -> Normalizer:
    feats = list(training_features)
    if not feats:
        raise DataError("cannot fit a normalizer on an empty feature list")
    d = len(feats[0])
    lo = Vector(list(feats[0].data))
    hi = Vector(list(feats[0].data))
    for f in feats[1:]:
        if len(f) != d:
            raise ShapeError(f"feature has {len(f)} dims, expected {d}")
        for i in range(d):
            x = f.data[i]
            if x < lo.data[i]:
                lo.data[i] = x
            if x > hi.data[i]:
                hi.data[i] = x
    return Normalizer(lo, hi)


def pose_target_path(input_pose, grid=None):
    """Indices of the decoding targets for an input pose: the walk toward
    frontal (exclusive of the input, inclusive of frontal), right-padded
    with frontal, plus one terminal frontal.  Always length 4."""
    grid = grid or PoseGrid()
    n = len(grid.poses)
    if not isinstance(input_pose, int) or not 0 <= input_pose < n:
        raise DataError(f"pose index {input_pose} outside 0..{n - 1}")
    f = grid.frontal_index
    if input_pose == f:
        path = []
    elif input_pose < f:
        path = list(range(input_pose + 1, f + 1))
    else:
        path = list(range(input_pose - 1, f - 1, -1))
    while len(path) < PATH_LEN - 1:
        path.append(f)
    path.append(f)
    return path


def build_pose_training_sample(pose_set, input_pose, grid=None, norm=None) -> SequenceSample:
    """Inputs are 4 copies of the input-pose feature; targets walk to frontal."""
    grid = grid or PoseGrid()
    path = pose_target_path(input_pose, grid)
    for p in [input_pose] + path:
        if p not in pose_set.features:
            raise DataError(
                f"subject {pose_set.subject_id} is missing pose {grid.poses[p]} deg"
            )
    feat = pose_set.features[input_pose]
    x = norm.apply(feat) if norm is not None else feat.copy()
    targets = [
        norm.apply(pose_set.features[p]) if norm is not None else pose_set.features[p].copy()
        for p in path
    ]
    return SequenceSample(
        inputs=[x.copy() for _ in range(PATH_LEN)],
        targets=targets,
        global_target=mean_of(targets),
        label=pose_set.subject_id,
        sample_id=f"{pose_set.subject_id}:p{input_pose}",
    )


def build_pose_test_sequence(feature, norm=None, sample_id="") -> SequenceSample:
    x = norm.apply(feature) if norm is not None else feature.copy()
    return SequenceSample(
        inputs=[x.copy() for _ in range(PATH_LEN)], sample_id=sample_id
    )


def build_video_clips(track, clip_len=10, norm=None):
    """Cut a track into non-overlapping clips whose targets are the clip mean.

    A final remainder shorter than clip_len is kept when it has at least
    clip_len/2 frames; a whole track shorter than clip_len is always kept.
    """
    if clip_len < 1:
        raise DataError("clip_len must be >= 1")
    if not track.frames:
        raise DataError("a video track needs at least one frame")
    frames = [norm.apply(f) if norm is not None else f.copy() for f in track.frames]
    if len(frames) < clip_len:
        windows = [frames]
    else:
        windows = []
        for start in range(0, len(frames), clip_len):
            w = frames[start : start + clip_len]
            if len(w) == clip_len or 2 * len(w) >= clip_len:
                windows.append(w)
    clips = []
    for k, w in enumerate(windows):
        mean = mean_of(w)
        clips.append(
            SequenceSample(
                inputs=w,
                targets=[mean.copy() for _ in range(len(w))],
                label=track.subject_id,
                sample_id=f"{track.subject_id}:c{k}",
            )
        )
    return clips


# rotation rate range for the shared pose-dependent linear map; per plane the
# rotation angle is pose_angle * rate, so features drift smoothly with pose.
# The range is set so that pose displacement, not sensor noise, dominates the
# raw nearest-neighbour error on the synthetic benchmarks.
_RATE_LO = 1.0
_RATE_HI = 1.4
_CUE_AMP = 0.8
_JUNK_SIGMA = 0.40


def _junk_split(d):
    """Number of identity-free clutter dimensions for a d-dim feature."""
    return max(0, (d - 4) // 3)


def _draw_planes(rng, d):
    idx = list(range(d))
    rng.shuffle(idx)
    planes = []
    for k in range(d // 2):
        planes.append((idx[2 * k], idx[2 * k + 1], rng.uniform(_RATE_LO, _RATE_HI)))
    return planes


def _rotate(vals, planes, theta):
    out = list(vals)
    for i, j, rate in planes:
        th = theta * rate
        c, s = math.cos(th), math.sin(th)
        vi, vj = out[i], out[j]
        out[i] = c * vi - s * vj
        out[j] = s * vi + c * vj
    return out


@dataclass
class PoseDataset:
    train: list  # SubjectPoseSet for the first ceil(n/2) subjects
    test: list  # the remaining subjects
    grid: PoseGrid = field(default_factory=PoseGrid)

    def subjects(self):
        return self.train + self.test


def _view_cue(theta):
    """Two feature dimensions that expose the view angle itself.

    A posed image always reveals its own pose, so the synthetic features
    carry it too; without this cue the frontalisation task would be
    ill-posed on unseen identities.  The cue is identical for every subject
    at a given pose, so it shifts all gallery distances equally and leaves
    a raw nearest-neighbour ranking untouched.
    """
    return [_CUE_AMP * math.cos(2.0 * theta), _CUE_AMP * math.sin(2.0 * theta)]


def synth_pose_dataset(n_subjects, d, noise_sigma, seed, grid=None) -> PoseDataset:
    """Random identities pushed through a shared pose-dependent rotation.

    Each feature has three blocks: identity dimensions rotated in random
    planes by an angle proportional to the pose, identity-free clutter
    dimensions redrawn for every image, and a two-dimensional view cue.
    Gaussian noise with noise_sigma is added on top.  The first ceil(n/2)
    subjects form the training split, the rest the gallery/probe split.
    """
    if n_subjects < 4:
        raise DataError("n_subjects must be >= 4")
    if d < 4:
        raise DataError("d must be >= 4")
    if noise_sigma < 0:
        raise DataError("noise_sigma must be >= 0")
    grid = grid or PoseGrid()
    rng = random.Random(seed)
    n_junk = _junk_split(d)
    n_ident = d - 2 - n_junk
    planes = _draw_planes(rng, n_ident)
    subjects = []
    for s in range(n_subjects):
        ident = [rng.uniform(-1.0, 1.0) for _ in range(n_ident)]
        feats = {}
        for pi, angle in enumerate(grid.poses):
            theta = math.radians(angle)
            v = _rotate(ident, planes, theta)
            v = v + [rng.gauss(0.0, _JUNK_SIGMA) for _ in range(n_junk)]
            v = v + _view_cue(theta)
            if noise_sigma:
                v = [x + rng.gauss(0.0, noise_sigma) for x in v]
            feats[pi] = Vector(v)
        subjects.append(SubjectPoseSet(subject_id=s, features=feats))
    n_train = (n_subjects + 1) // 2
    return PoseDataset(train=subjects[:n_train], test=subjects[n_train:], grid=grid)


def synth_video_dataset(
    n_subjects, clips_per_subject, frames, d, noise_sigma, seed, walk_step=0.08
):
    """Tracks whose frames follow a smooth random-walk view parameter.

    Returns clips_per_subject tracks per subject, each ``frames`` long.
    """
    if n_subjects < 2:
        raise DataError("n_subjects must be >= 2")
    if clips_per_subject < 1:
        raise DataError("clips_per_subject must be >= 1")
    if frames < 1:
        raise DataError("frames must be >= 1")
    if d < 2:
        raise DataError("d must be >= 2")
    if noise_sigma < 0 or walk_step < 0:
        raise DataError("noise_sigma and walk_step must be >= 0")
    rng = random.Random(seed)
    planes = _draw_planes(rng, d)
    tracks = []
    for s in range(n_subjects):
        ident = [rng.uniform(-1.0, 1.0) for _ in range(d)]
        for _ in range(clips_per_subject):
            view = rng.uniform(-0.8, 0.8)
            fs = []
            for _ in range(frames):
                v = _rotate(ident, planes, view)
                if noise_sigma:
                    v = [x + rng.gauss(0.0, noise_sigma) for x in v]
                fs.append(Vector(v))
                if walk_step:
                    view += rng.gauss(0.0, walk_step)
                    view = max(-1.0, min(1.0, view))
            tracks.append(VideoTrack(subject_id=s, frames=fs))
    return tracks
