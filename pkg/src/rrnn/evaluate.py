"""Inference-time evaluation: embeddings, KNN identification, video scoring.

The identification feature is the mean over time of the hidden states.  The
pose task matches probe embeddings against a one-image-per-subject gallery
with KNN; the video task averages the classifier posterior over every
timestep of every clip of a track and predicts the argmax.
"""

import math
import random
from dataclasses import dataclass, field

from .errors import DataError, NoHeadError, ShapeError
from .linalg import Vector, dist, mean_of
from .model import ModelParams, class_posterior, forward
from .protocols import PoseGrid, build_pose_test_sequence, build_video_clips

_DISTANCES = ("euclidean", "cosine")


@dataclass
class Embedding:
    vector: Vector  # length = model hidden size
    source_id: str = ""


@dataclass
class PoseReport:
    """Per-probe-pose accuracies for one gallery pose, plus their average."""

    gallery_pose: int
    per_pose: dict  # probe pose index -> accuracy in [0, 1]
    average: float
    probe_counts: dict = field(default_factory=dict)


@dataclass
class VideoReport:
    trials: list  # accuracy per trial, each in [0, 1]
    mean: float
    std: float  # population standard deviation; 0 for a single trial


def embed(sample, p: ModelParams) -> Embedding:
    trace = forward(sample, p)
    return Embedding(vector=mean_of(trace.hidden), source_id=sample.sample_id)


def _distance(a: Vector, b: Vector, metric):
    if metric == "euclidean":
        return dist(a, b)
    na = math.sqrt(math.fsum(x * x for x in a.data))
    nb = math.sqrt(math.fsum(x * x for x in b.data))
    if na == 0.0 or nb == 0.0:
        return 1.0
    dot = math.fsum(x * y for x, y in zip(a.data, b.data))
    return 1.0 - dot / (na * nb)


def knn_classify(gallery, probe, k=1, distance="euclidean"):
    """Majority label among the k nearest gallery embeddings.

    Ties are broken by smaller mean distance within the k set, then by
    smaller label.
    """
    if not gallery:
        raise DataError("gallery is empty")
    if k < 1:
        raise DataError("k must be >= 1")
    if distance not in _DISTANCES:
        raise DataError(f"unknown distance {distance!r}")
    pv = probe.vector if isinstance(probe, Embedding) else probe
    ranked = []
    for idx, (emb, label) in enumerate(gallery):
        ev = emb.vector if isinstance(emb, Embedding) else emb
        if len(ev) != len(pv):
            raise ShapeError(
                f"gallery embedding has {len(ev)} dims, probe has {len(pv)}"
            )
        ranked.append((_distance(ev, pv, distance), label, idx))
    ranked.sort()
    top = ranked[: min(k, len(ranked))]
    by_label = {}
    for d, label, _ in top:
        cnt, tot = by_label.get(label, (0, 0.0))
        by_label[label] = (cnt + 1, tot + d)
    # most votes, then smallest mean distance, then smallest label
    return min(by_label, key=lambda lb: (-by_label[lb][0], by_label[lb][1] / by_label[lb][0], lb))


def pose_experiment(
    params, test_subjects, norm=None, gallery_pose=None, k=1, grid=None,
    distance="euclidean",
) -> PoseReport:
    """Gallery = each subject's image at gallery_pose; probes = every other pose."""
    grid = grid or PoseGrid()
    if gallery_pose is None:
        gallery_pose = grid.frontal_index
    if not 0 <= gallery_pose < len(grid.poses):
        raise DataError(f"gallery pose index {gallery_pose} outside the grid")
    if not test_subjects:
        raise DataError("no test subjects to evaluate")
    gallery = []
    for s in test_subjects:
        if gallery_pose not in s.features:
            raise DataError(
                f"subject {s.subject_id} has no pose "
                f"{grid.poses[gallery_pose]} deg image for the gallery"
            )
        seq = build_pose_test_sequence(
            s.features[gallery_pose], norm, sample_id=f"{s.subject_id}:g"
        )
        gallery.append((embed(seq, params), s.subject_id))
    per_pose = {}
    counts = {}
    for p in range(len(grid.poses)):
        if p == gallery_pose:
            continue
        correct = total = 0
        for s in test_subjects:
            if p not in s.features:
                continue
            seq = build_pose_test_sequence(
                s.features[p], norm, sample_id=f"{s.subject_id}:p{p}"
            )
            pred = knn_classify(gallery, embed(seq, params), k, distance)
            correct += pred == s.subject_id
            total += 1
        if total:
            per_pose[p] = correct / total
            counts[p] = total
    if not per_pose:
        raise DataError("no probe images outside the gallery pose")
    average = math.fsum(per_pose.values()) / len(per_pose)
    return PoseReport(
        gallery_pose=gallery_pose, per_pose=per_pose, average=average,
        probe_counts=counts,
    )


def cross_pose_matrix(params, test_subjects, norm=None, k=1, grid=None,
                      distance="euclidean"):
    """One PoseReport per gallery pose; the diagonal stays empty."""
    grid = grid or PoseGrid()
    return {
        g: pose_experiment(params, test_subjects, norm, g, k, grid, distance)
        for g in range(len(grid.poses))
    }


def video_score(clips, params: ModelParams) -> Vector:
    """Mean class posterior over all timesteps of all clips of one video."""
    if params.c < 2:
        raise NoHeadError("video scoring needs a classifier head with >= 2 classes")
    if not clips:
        raise DataError("no clips to score")
    acc = Vector.zeros(params.c)
    steps = 0
    for clip in clips:
        trace = forward(clip, params)
        for s_t in trace.hidden:
            post = class_posterior(s_t, params)
            for i in range(params.c):
                acc.data[i] += post.data[i]
            steps += 1
    for i in range(params.c):
        acc.data[i] /= steps
    return acc


def predict_from_score(score: Vector) -> int:
    best = 0
    for i in range(1, len(score)):
        if score.data[i] > score.data[best]:
            best = i
    return best


def class_index_map(tracks):
    """Class index = rank of the subject id among the distinct ids, ascending."""
    ids = sorted({t.subject_id for t in tracks})
    return {sid: i for i, sid in enumerate(ids)}


def split_video_tracks(tracks, seed, trial):
    """Seeded per-subject split: max(1, n//3) train tracks, the rest test.

    Deterministic in (tracks order, seed, trial).  Every subject must have
    at least 2 tracks so both sides are nonempty.
    """
    by_subject = {}
    for i, t in enumerate(tracks):
        by_subject.setdefault(t.subject_id, []).append(i)
    rng = random.Random(seed * 100003 + trial)
    train, test = [], []
    for sid in sorted(by_subject):
        idxs = list(by_subject[sid])
        if len(idxs) < 2:
            raise DataError(
                f"subject {sid} has {len(idxs)} track(s); need at least 2 to split"
            )
        rng.shuffle(idxs)
        n_train = max(1, len(idxs) // 3)
        train.extend(idxs[:n_train])
        test.extend(idxs[n_train:])
    return [tracks[i] for i in sorted(train)], [tracks[i] for i in sorted(test)]


def video_experiment(
    tracks, params: ModelParams, trials=10, seed=0, clip_len=10, norm=None
) -> VideoReport:
    """Score the per-trial test tracks and report mean and std over trials."""
    if trials < 1:
        raise DataError("trials must be >= 1")
    classes = class_index_map(tracks)
    if len(classes) < 2:
        raise DataError("video evaluation needs at least 2 subjects")
    if params.c < len(classes):
        raise DataError(
            f"model head has {params.c} classes, dataset has {len(classes)} subjects"
        )
    accs = []
    for trial in range(trials):
        _, test = split_video_tracks(tracks, seed, trial)
        correct = 0
        for t in test:
            clips = build_video_clips(t, clip_len, norm)
            pred = predict_from_score(video_score(clips, params))
            correct += pred == classes[t.subject_id]
        accs.append(correct / len(test))
    mean = math.fsum(accs) / len(accs)
    var = math.fsum((a - mean) ** 2 for a in accs) / len(accs)
    return VideoReport(trials=accs, mean=mean, std=math.sqrt(var))


def _fmt_pct(a):
    return f"{100.0 * a:6.2f}"


def format_pose_report(report: PoseReport, grid=None) -> str:
    grid = grid or PoseGrid()
    lines = [f"gallery pose: {grid.poses[report.gallery_pose]} deg"]
    lines.append("probe pose  accuracy")
    for p in sorted(report.per_pose):
        lines.append(f"{grid.poses[p]:>10}  {_fmt_pct(report.per_pose[p])}")
    lines.append(f"{'average':>10}  {_fmt_pct(report.average)}")
    return "\n".join(lines)


def pose_record_stream(report: PoseReport, grid=None):
    grid = grid or PoseGrid()
    out = [f"{grid.poses[p]},{report.per_pose[p]:.6f}" for p in sorted(report.per_pose)]
    out.append(f"average,{report.average:.6f}")
    return out


def format_cross_pose(matrix, grid=None) -> str:
    grid = grid or PoseGrid()
    n = len(grid.poses)
    head = ["gallery\\probe"] + [f"{grid.poses[p]:>6}" for p in range(n)] + ["   avg"]
    lines = ["  ".join(head)]
    for g in range(n):
        rep = matrix[g]
        cells = []
        for p in range(n):
            cells.append("     -" if p == g else _fmt_pct(rep.per_pose[p]))
        row = [f"{grid.poses[g]:>13}"] + cells + [_fmt_pct(rep.average)]
        lines.append("  ".join(row))
    return "\n".join(lines)


def cross_pose_record_stream(matrix, grid=None):
    grid = grid or PoseGrid()
    out = []
    for g in sorted(matrix):
        rep = matrix[g]
        for p in sorted(rep.per_pose):
            out.append(f"{grid.poses[g]},{grid.poses[p]},{rep.per_pose[p]:.6f}")
    return out


def format_video_report(report: VideoReport) -> str:
    lines = ["trial  accuracy"]
    for i, a in enumerate(report.trials, start=1):
        lines.append(f"{i:>5}  {_fmt_pct(a)}")
    lines.append(f" mean  {_fmt_pct(report.mean)} +- {100.0 * report.std:.2f}")
    return "\n".join(lines)


def video_record_stream(report: VideoReport):
    out = [f"{i},{a:.6f}" for i, a in enumerate(report.trials, start=1)]
    out.append(f"mean,{report.mean:.6f}")
    out.append(f"std,{report.std:.6f}")
    return out
