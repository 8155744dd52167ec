"""Text serialization: feature datasets, model files, training histories.

Everything is ASCII text with decimal floats chosen to round-trip the exact
64-bit value (repr for datasets and histories, 17 significant digits for
model files), so identical runs produce byte-identical artifacts and a
save/load cycle reproduces bit-identical numerics.
"""

import math
from dataclasses import dataclass, field

from .errors import DataError
from .linalg import Matrix, Vector
from .model import ModelParams
from .protocols import Normalizer, PoseDataset, PoseGrid, SubjectPoseSet, VideoTrack

FEATURES_MAGIC = "rrnn-features"
FEATURES_VERSION = "v1"
MODEL_MAGIC = "rrnn-model"
MODEL_VERSION = "v1"
HISTORY_MAGIC = "rrnn-history"
HISTORY_VERSION = "v1"


def _fmt(x):
    return repr(float(x))


def _err(path, line_no, msg):
    return DataError(f"{path}: line {line_no}: {msg}")


def _read_lines(path):
    try:
        with open(path, "r", encoding="ascii", newline="") as fh:
            return fh.read().splitlines()
    except UnicodeDecodeError:
        raise DataError(f"{path}: file is not ASCII text") from None


# ---------------------------------------------------------------- features


def write_features(path, records, d):
    """Write the `rrnn-features v1` format.

    ``records`` is an iterable of (sample_id, label, tag, Vector); ids must
    be whitespace-free ASCII.
    """
    if d < 1:
        raise DataError("feature dimension must be >= 1")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{FEATURES_MAGIC} {FEATURES_VERSION} d={d}\n")
        for sample_id, label, tag, vec in records:
            sid = str(sample_id)
            if not sid or any(ch.isspace() for ch in sid):
                raise DataError(f"bad sample id {sample_id!r}")
            if len(vec) != d:
                raise DataError(
                    f"record {sid} has {len(vec)} values, header says d={d}"
                )
            vals = " ".join(_fmt(x) for x in vec.data)
            fh.write(f"{sid} {int(label)} {int(tag)} {vals}\n")


def read_features(path):
    """Parse a feature file into (d, records); records keep their line number.

    Malformed lines are rejected with a 1-based line number; nothing is
    ingested partially.
    """
    lines = _read_lines(path)
    if not lines:
        raise _err(path, 1, "missing header")
    head = lines[0].split()
    if len(head) != 3 or head[0] != FEATURES_MAGIC:
        raise _err(path, 1, f"expected `{FEATURES_MAGIC} {FEATURES_VERSION} d=<d>`")
    if head[1] != FEATURES_VERSION:
        raise _err(path, 1, f"unsupported version {head[1]!r}")
    if not head[2].startswith("d="):
        raise _err(path, 1, "missing d=<d> field")
    try:
        d = int(head[2][2:])
    except ValueError:
        raise _err(path, 1, f"bad dimension {head[2][2:]!r}") from None
    if d < 1:
        raise _err(path, 1, "dimension must be >= 1")
    records = []
    for no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3 + d:
            raise _err(path, no, f"expected {3 + d} fields, found {len(parts)}")
        sid = parts[0]
        try:
            label = int(parts[1])
        except ValueError:
            raise _err(path, no, f"bad subject label {parts[1]!r}") from None
        try:
            tag = int(parts[2])
        except ValueError:
            raise _err(path, no, f"bad tag {parts[2]!r}") from None
        try:
            vals = [float(t) for t in parts[3:]]
        except ValueError:
            raise _err(path, no, "bad decimal value") from None
        if not all(math.isfinite(v) for v in vals):
            raise _err(path, no, "non-finite value")
        records.append((no, sid, label, tag, Vector(vals)))
    return d, records


def write_pose_dataset(path, dataset: PoseDataset):
    def gen():
        for s in dataset.subjects():
            for p in sorted(s.features):
                yield f"s{s.subject_id}", s.subject_id, p, s.features[p]

    d = len(next(iter(dataset.subjects()[0].features.values())))
    write_features(path, gen(), d)


def read_pose_dataset(path, grid=None) -> PoseDataset:
    """Group records by subject; the split is re-derived as first-half train."""
    grid = grid or PoseGrid()
    d, records = read_features(path)
    subjects = {}
    for no, _sid, label, tag, vec in records:
        if not 0 <= tag < len(grid.poses):
            raise _err(path, no, f"pose index {tag} outside 0..{len(grid.poses) - 1}")
        feats = subjects.setdefault(label, {})
        if tag in feats:
            raise _err(path, no, f"duplicate pose {tag} for subject {label}")
        feats[tag] = vec
    if not subjects:
        raise DataError(f"{path}: no records")
    ordered = [
        SubjectPoseSet(subject_id=sid, features=subjects[sid])
        for sid in sorted(subjects)
    ]
    n_train = (len(ordered) + 1) // 2
    return PoseDataset(train=ordered[:n_train], test=ordered[n_train:], grid=grid)


def write_video_dataset(path, tracks):
    def gen():
        for k, t in enumerate(tracks):
            for i, f in enumerate(t.frames):
                yield f"t{k}", t.subject_id, i, f

    if not tracks:
        raise DataError("no tracks to write")
    d = len(tracks[0].frames[0])
    write_features(path, gen(), d)


def read_video_dataset(path):
    """Group records into tracks by sample id, frames ordered by tag."""
    d, records = read_features(path)
    order = []
    by_track = {}
    for no, sid, label, tag, vec in records:
        if sid not in by_track:
            by_track[sid] = (label, {})
            order.append(sid)
        tlabel, frames = by_track[sid]
        if tlabel != label:
            raise _err(path, no, f"track {sid} has conflicting subject labels")
        if tag in frames:
            raise _err(path, no, f"duplicate frame {tag} in track {sid}")
        frames[tag] = vec
    if not order:
        raise DataError(f"{path}: no records")
    tracks = []
    for sid in order:
        label, frames = by_track[sid]
        tracks.append(
            VideoTrack(
                subject_id=label, frames=[frames[t] for t in sorted(frames)]
            )
        )
    return tracks


# ------------------------------------------------------------------ model


def _fmt17(x):
    return f"{float(x):.17g}"


@dataclass
class ModelFile:
    params: ModelParams
    norm: Normalizer | None = None
    hyper: dict = field(default_factory=dict)


def save_model(path, params: ModelParams, norm=None, hyper=None):
    """Write the model file: version, dims, normalizer, hyperparameters,
    then the tensors U, W, b1, V, b2 (and G, b3 with a head), row-major."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{MODEL_MAGIC} {MODEL_VERSION}\n")
        fh.write(f"dims {params.d} {params.h} {params.c}\n")
        if norm is None:
            fh.write("norm none\n")
        else:
            if len(norm) != params.d:
                raise DataError(
                    f"normalizer has {len(norm)} dims, model has {params.d}"
                )
            fh.write("norm lo " + " ".join(_fmt17(x) for x in norm.lo.data) + "\n")
            fh.write("norm hi " + " ".join(_fmt17(x) for x in norm.hi.data) + "\n")
        for key in sorted(hyper or {}):
            val = str((hyper or {})[key])
            if any(ch.isspace() for ch in key) or any(ch.isspace() for ch in val):
                raise DataError(f"hyperparameter {key!r} must be whitespace-free")
            fh.write(f"hyper {key} {val}\n")
        for name, t in params.tensors():
            if isinstance(t, Matrix):
                rows, cols = t.shape()
                fh.write(f"tensor {name} {rows} {cols}\n")
                for r in range(rows):
                    base = r * cols
                    fh.write(
                        " ".join(_fmt17(t.data[base + c]) for c in range(cols)) + "\n"
                    )
            else:
                fh.write(f"tensor {name} 1 {len(t)}\n")
                fh.write(" ".join(_fmt17(x) for x in t.data) + "\n")


def load_model(path) -> ModelFile:
    lines = _read_lines(path)
    if not lines or lines[0].split() != [MODEL_MAGIC, MODEL_VERSION]:
        raise _err(path, 1, f"expected `{MODEL_MAGIC} {MODEL_VERSION}`")
    pos = 1

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise _err(path, len(lines) + 1, "unexpected end of file")
        line = lines[pos]
        pos += 1
        return pos, line

    no, line = take()
    parts = line.split()
    if len(parts) != 4 or parts[0] != "dims":
        raise _err(path, no, "expected `dims <d> <h> <c>`")
    try:
        d, h, c = int(parts[1]), int(parts[2]), int(parts[3])
    except ValueError:
        raise _err(path, no, "bad dims") from None
    if d < 1 or h < 1 or c < 0:
        raise _err(path, no, f"invalid dims {d} {h} {c}")

    def floats(parts, no, want):
        if len(parts) != want:
            raise _err(path, no, f"expected {want} values, found {len(parts)}")
        try:
            return [float(t) for t in parts]
        except ValueError:
            raise _err(path, no, "bad decimal value") from None

    no, line = take()
    parts = line.split()
    norm = None
    if parts[:2] == ["norm", "none"]:
        pass
    elif parts[:2] == ["norm", "lo"]:
        lo = floats(parts[2:], no, d)
        no, line = take()
        parts = line.split()
        if parts[:2] != ["norm", "hi"]:
            raise _err(path, no, "expected `norm hi ...` after `norm lo`")
        hi = floats(parts[2:], no, d)
        norm = Normalizer(Vector(lo), Vector(hi))
    else:
        raise _err(path, no, "expected a `norm` line")

    hyper = {}
    while pos < len(lines) and lines[pos].startswith("hyper "):
        no, line = take()
        parts = line.split()
        if len(parts) != 3:
            raise _err(path, no, "expected `hyper <key> <value>`")
        hyper[parts[1]] = parts[2]

    want = [("U", h, d), ("W", h, h), ("b1", 1, h), ("V", d, h), ("b2", 1, d)]
    if c:
        want += [("G", c, h), ("b3", 1, c)]
    tensors = {}
    for name, rows, cols in want:
        no, line = take()
        parts = line.split()
        if parts != ["tensor", name, str(rows), str(cols)]:
            raise _err(path, no, f"expected `tensor {name} {rows} {cols}`")
        data = []
        for _ in range(rows):
            no, line = take()
            data.extend(floats(line.split(), no, cols))
        tensors[name] = (rows, cols, data)
    if pos != len(lines):
        raise _err(path, pos + 1, "trailing content after tensors")

    def mat(name):
        rows, cols, data = tensors[name]
        return Matrix(rows, cols, data)

    def vec(name):
        _, cols, data = tensors[name]
        return Vector(data)

    params = ModelParams(
        d=d, h=h, c=c,
        U=mat("U"), W=mat("W"), b1=vec("b1"), V=mat("V"), b2=vec("b2"),
        G=mat("G") if c else None, b3=vec("b3") if c else None,
    )
    return ModelFile(params=params, norm=norm, hyper=hyper)


# ---------------------------------------------------------------- history


def save_history(path, history):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"{HISTORY_MAGIC} {HISTORY_VERSION}\n")
        fh.write("epoch f1 f2 f3 total\n")
        for i, r in enumerate(history, start=1):
            fh.write(
                f"{i} {_fmt(r.f1)} {_fmt(r.f2)} {_fmt(r.f3)} {_fmt(r.total)}\n"
            )


def load_history(path):
    from .optim import EpochRecord, TrainHistory

    lines = _read_lines(path)
    if not lines or lines[0].split() != [HISTORY_MAGIC, HISTORY_VERSION]:
        raise _err(path, 1, f"expected `{HISTORY_MAGIC} {HISTORY_VERSION}`")
    if len(lines) < 2 or lines[1].split() != ["epoch", "f1", "f2", "f3", "total"]:
        raise _err(path, 2, "expected the history column header")
    hist = TrainHistory()
    for no, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 5:
            raise _err(path, no, f"expected 5 fields, found {len(parts)}")
        try:
            epoch = int(parts[0])
            vals = [float(t) for t in parts[1:]]
        except ValueError:
            raise _err(path, no, "bad value") from None
        if epoch != len(hist.records) + 1:
            raise _err(path, no, f"epoch {epoch} out of order")
        hist.records.append(
            EpochRecord(f1=vals[0], f2=vals[1], f3=vals[2], total=vals[3])
        )
    return hist
