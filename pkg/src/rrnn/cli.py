"""Command line interface: synth, train, eval, gradcheck, ablate.

Exit codes: 0 success, 1 usage, 2 data or I/O error, 3 numeric failure.
``RRNN_LOG=quiet|info|debug`` controls chatter; machine-readable record
streams are printed regardless.
"""

import argparse
import os
import random
import sys

from . import linalg
from .bptt import grad_check_detail
from .errors import DataError, NumericError, RrnnError
from .evaluate import (
    class_index_map,
    cross_pose_matrix,
    cross_pose_record_stream,
    format_cross_pose,
    format_pose_report,
    format_video_report,
    pose_experiment,
    pose_record_stream,
    split_video_tracks,
    video_experiment,
    video_record_stream,
)
from .linalg import Matrix, Vector
from .model import ModelParams, SequenceSample
from .optim import TrainConfig, train
from .protocols import (
    POSE_ANGLES,
    build_pose_training_sample,
    build_video_clips,
    fit_normalizer,
    synth_pose_dataset,
    synth_video_dataset,
)
from .storage import (
    load_model,
    read_pose_dataset,
    read_video_dataset,
    save_history,
    save_model,
    write_pose_dataset,
    write_video_dataset,
)

_LEVELS = {"quiet": 0, "info": 1, "debug": 2}
GRADCHECK_TOL = 1e-4


def _level():
    return _LEVELS.get(os.environ.get("RRNN_LOG", "info"), 1)


def _info(msg):
    if _level() >= 1:
        print(msg)


def _debug(msg):
    if _level() >= 2:
        print(msg)


class _Parser(argparse.ArgumentParser):
    # usage problems exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _add_train_flags(p):
    p.add_argument("--alpha", type=float, default=None,
                   help="weight of the sequence-statistic term (task default)")
    p.add_argument("--beta", type=float, default=None,
                   help="weight of the discriminative term (task default)")
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--batch", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--optimizer", choices=["sgd", "adam"], default="adam")
    p.add_argument("--momentum", type=float, default=0.0)
    p.add_argument("--init-scale", type=float, default=1.0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--clip-len", type=int, default=10,
                   help="training clip length (video task)")
    p.add_argument("--no-frontal-inputs", action="store_true",
                   help="pose task: skip samples whose input is the frontal pose")


def _add_eval_flags(p):
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--gallery-pose", type=int, choices=list(POSE_ANGLES),
                   default=0, metavar="ANGLE", help="gallery pose in degrees")
    p.add_argument("--distance", choices=["euclidean", "cosine"],
                   default="euclidean")
    p.add_argument("--trials", type=int, default=10)


def build_parser():
    parser = _Parser(prog="rrnn", description="recurrent regression network")
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    sp = sub.add_parser("synth", help="generate a synthetic dataset")
    sp.add_argument("kind", choices=["pose", "video"])
    sp.add_argument("--out", required=True)
    sp.add_argument("--subjects", type=int, default=20)
    sp.add_argument("--dim", type=int, default=16)
    sp.add_argument("--noise", type=float, default=0.1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--clips", type=int, default=3, help="tracks per subject")
    sp.add_argument("--frames", type=int, default=25, help="frames per track")
    sp.add_argument("--walk-step", type=float, default=0.08)
    sp.set_defaults(func=cmd_synth)

    tp = sub.add_parser("train", help="train a model on a dataset file")
    tp.add_argument("task", choices=["pose", "video"])
    tp.add_argument("data")
    tp.add_argument("--out", required=True)
    _add_train_flags(tp)
    tp.set_defaults(func=cmd_train)

    ep = sub.add_parser("eval", help="evaluate a saved model")
    ep.add_argument("task", choices=["pose", "video"])
    ep.add_argument("model")
    ep.add_argument("data")
    _add_eval_flags(ep)
    ep.add_argument("--cross-pose", action="store_true")
    ep.add_argument("--clip-len", type=int, default=10)
    ep.add_argument("--seed", type=int, default=0)
    ep.set_defaults(func=cmd_eval)

    gp = sub.add_parser("gradcheck", help="finite-difference gradient check")
    gp.add_argument("--dim", type=int, default=3)
    gp.add_argument("--hidden", type=int, default=4)
    gp.add_argument("--classes", type=int, default=3)
    gp.add_argument("--steps", type=int, default=4, help="sequence length")
    gp.add_argument("--seed", type=int, default=0)
    gp.add_argument("--step", type=float, default=1e-5)
    gp.add_argument("--corrupt", default=None, metavar="TENSOR",
                    help="debug: perturb one gradient tensor before checking")
    gp.set_defaults(func=cmd_gradcheck)

    ap = sub.add_parser("ablate", help="train and evaluate over an (alpha, beta) grid")
    ap.add_argument("task", choices=["pose", "video"])
    ap.add_argument("data")
    ap.add_argument("--alphas", type=_float_list, default=None)
    ap.add_argument("--betas", type=_float_list, default=None)
    _add_train_flags(ap)
    _add_eval_flags(ap)
    ap.set_defaults(func=cmd_ablate)
    return parser


def _task_defaults(task, alpha, beta):
    if alpha is None:
        alpha = 0.1 if task == "pose" else 0.0
    if beta is None:
        beta = 0.0 if task == "pose" else 1.0
    return alpha, beta


def cmd_synth(args):
    if args.kind == "pose":
        ds = synth_pose_dataset(args.subjects, args.dim, args.noise, args.seed)
        write_pose_dataset(args.out, ds)
        _info(
            f"wrote pose dataset: {args.subjects} subjects x 7 poses, "
            f"d={args.dim} -> {args.out}"
        )
    else:
        tracks = synth_video_dataset(
            args.subjects, args.clips, args.frames, args.dim,
            args.noise, args.seed, args.walk_step,
        )
        write_video_dataset(args.out, tracks)
        _info(f"wrote video dataset: {len(tracks)} tracks, d={args.dim} -> {args.out}")
    return 0


def _epoch_logger(total):
    def log(epoch, r):
        _info(
            f"epoch {epoch + 1}/{total} f1={r.f1:.6f} f2={r.f2:.6f} "
            f"f3={r.f3:.6f} total={r.total:.6f}"
        )

    return log


def _train_cfg(args, alpha, beta, classes):
    return TrainConfig(
        alpha=alpha,
        beta=beta,
        hidden=args.hidden,
        optimizer=args.optimizer,
        learning_rate=args.lr,
        momentum=args.momentum,
        batch_size=args.batch,
        epochs=args.epochs,
        seed=args.seed,
        init_scale=args.init_scale,
        classes=classes,
        threads=args.threads,
    )


def _train_pose(dataset, args, alpha, beta):
    subjects = dataset.train
    if not subjects:
        raise DataError("pose dataset has no training subjects")
    norm = fit_normalizer(
        [s.features[p] for s in subjects for p in sorted(s.features)]
    )
    rank = {sid: i for i, sid in enumerate(sorted(s.subject_id for s in subjects))}
    samples = []
    for s in subjects:
        for p in sorted(s.features):
            if args.no_frontal_inputs and p == dataset.grid.frontal_index:
                continue
            smp = build_pose_training_sample(s, p, dataset.grid, norm)
            smp.label = rank[s.subject_id]
            samples.append(smp)
    classes = len(rank) if beta > 0 else 0
    cfg = _train_cfg(args, alpha, beta, classes)
    params, history = train(samples, cfg, on_epoch=_epoch_logger(args.epochs))
    return params, norm, history


def _train_video(tracks, args, alpha, beta):
    train_tracks, _ = split_video_tracks(tracks, args.seed, 0)
    norm = fit_normalizer([f for t in train_tracks for f in t.frames])
    classes = class_index_map(tracks)
    samples = []
    for t in train_tracks:
        for clip in build_video_clips(t, args.clip_len, norm):
            clip.label = classes[t.subject_id]
            samples.append(clip)
    # the head always exists for video models so a beta=0 ablation can be
    # scored with its untrained (chance-level) classifier
    cfg = _train_cfg(args, alpha, beta, len(classes))
    params, history = train(samples, cfg, on_epoch=_epoch_logger(args.epochs))
    return params, norm, history


def cmd_train(args):
    alpha, beta = _task_defaults(args.task, args.alpha, args.beta)
    _debug(f"backend: {linalg.backend_name()}")
    if args.task == "pose":
        dataset = read_pose_dataset(args.data)
        params, norm, history = _train_pose(dataset, args, alpha, beta)
    else:
        tracks = read_video_dataset(args.data)
        params, norm, history = _train_video(tracks, args, alpha, beta)
    hyper = {
        "task": args.task,
        "alpha": repr(alpha),
        "beta": repr(beta),
        "hidden": str(args.hidden),
        "lr": repr(args.lr),
        "epochs": str(args.epochs),
        "batch": str(args.batch),
        "seed": str(args.seed),
        "optimizer": args.optimizer,
        "momentum": repr(args.momentum),
        "init_scale": repr(args.init_scale),
        "clip_len": str(args.clip_len),
    }
    save_model(args.out, params, norm, hyper)
    save_history(args.out + ".history", history)
    _info(f"saved model -> {args.out}")
    _info(f"saved history -> {args.out}.history")
    return 0


def _check_dims(model_d, data_d):
    if model_d != data_d:
        raise DataError(f"model expects d={model_d}, dataset has d={data_d}")


def cmd_eval(args):
    mf = load_model(args.model)
    if args.task == "pose":
        dataset = read_pose_dataset(args.data)
        any_subject = dataset.subjects()[0]
        _check_dims(mf.params.d, len(next(iter(any_subject.features.values()))))
        subjects = dataset.test
        if not subjects:
            raise DataError("pose dataset has no test subjects")
        if args.cross_pose:
            matrix = cross_pose_matrix(
                mf.params, subjects, mf.norm, args.k, dataset.grid, args.distance
            )
            _info(format_cross_pose(matrix, dataset.grid))
            for line in cross_pose_record_stream(matrix, dataset.grid):
                print(line)
        else:
            g = POSE_ANGLES.index(args.gallery_pose)
            rep = pose_experiment(
                mf.params, subjects, mf.norm, g, args.k, dataset.grid, args.distance
            )
            _info(format_pose_report(rep, dataset.grid))
            for line in pose_record_stream(rep, dataset.grid):
                print(line)
    else:
        tracks = read_video_dataset(args.data)
        _check_dims(mf.params.d, len(tracks[0].frames[0]))
        rep = video_experiment(
            tracks, mf.params, args.trials, args.seed, args.clip_len, mf.norm
        )
        _info(format_video_report(rep))
        for line in video_record_stream(rep):
            print(line)
    return 0


def _random_check_params(rng, d, h, c):
    def mat(r, co):
        return Matrix(r, co, [rng.uniform(-0.5, 0.5) for _ in range(r * co)])

    def vec(n):
        return Vector([rng.uniform(-0.5, 0.5) for _ in range(n)])

    return ModelParams(
        d=d, h=h, c=c,
        U=mat(h, d), W=mat(h, h), b1=vec(h), V=mat(d, h), b2=vec(d),
        G=mat(c, h) if c else None, b3=vec(c) if c else None,
    )


def cmd_gradcheck(args):
    if args.dim < 1 or args.hidden < 1 or args.classes < 0 or args.steps < 1:
        raise DataError("gradcheck dims must be positive (classes may be 0)")
    rng = random.Random(args.seed)
    p = _random_check_params(rng, args.dim, args.hidden, args.classes)
    mk = lambda: Vector([rng.uniform(-0.9, 0.9) for _ in range(args.dim)])
    sample = SequenceSample(
        inputs=[mk() for _ in range(args.steps)],
        targets=[mk() for _ in range(args.steps)],
        global_target=mk(),
        label=rng.randrange(args.classes) if args.classes else None,
    )
    _debug(f"backend: {linalg.backend_name()}")
    worst = None
    for alpha in (0.0, 0.1, 1.0):
        for beta in (0.0, 0.1, 1.0):
            if beta > 0 and args.classes == 0:
                continue
            res = grad_check_detail(
                sample, p, alpha, beta, step=args.step, corrupt=args.corrupt
            )
            _debug(
                f"alpha={alpha:g} beta={beta:g} max_err={res.max_err:.3e} "
                f"param={res.worst_param}"
            )
            if worst is None or res.max_err > worst[0]:
                worst = (res.max_err, alpha, beta, res)
    err, alpha, beta, res = worst
    print(
        f"gradcheck max_err={err:.6e} at alpha={alpha:g} beta={beta:g} "
        f"param={res.worst_param} index={res.worst_index}"
    )
    return 0 if err <= GRADCHECK_TOL else 3


def cmd_ablate(args):
    if args.task == "pose":
        alphas = args.alphas if args.alphas is not None else [0.0, 0.1]
        betas = args.betas if args.betas is not None else [0.0]
    else:
        alphas = args.alphas if args.alphas is not None else [0.0]
        betas = args.betas if args.betas is not None else [0.0, 1.0]
    if not alphas or not betas:
        raise DataError("ablation grid is empty")
    rows = []
    if args.task == "pose":
        dataset = read_pose_dataset(args.data)
        if not dataset.test:
            raise DataError("pose dataset has no test subjects")
        g = POSE_ANGLES.index(args.gallery_pose)
        for alpha in alphas:
            for beta in betas:
                params, norm, _ = _train_pose(dataset, args, alpha, beta)
                rep = pose_experiment(
                    params, dataset.test, norm, g, args.k, dataset.grid,
                    args.distance,
                )
                rows.append((alpha, beta, rep.average, None))
    else:
        tracks = read_video_dataset(args.data)
        for alpha in alphas:
            for beta in betas:
                params, norm, _ = _train_video(tracks, args, alpha, beta)
                rep = video_experiment(
                    tracks, params, args.trials, args.seed, args.clip_len, norm
                )
                rows.append((alpha, beta, rep.mean, rep.std))
    _info(" alpha   beta  accuracy")
    for alpha, beta, acc, std in rows:
        extra = "" if std is None else f" +- {100.0 * std:.2f}"
        _info(f"{alpha:>6g} {beta:>6g}  {100.0 * acc:6.2f}{extra}")
    for alpha, beta, acc, _ in rows:
        print(f"{alpha:g},{beta:g},{acc:.6f}")
    return 0


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        if isinstance(e.code, int):
            return e.code
        return 0 if e.code is None else 1
    try:
        return args.func(args)
    except NumericError as e:
        print(f"rrnn: numeric failure: {e}", file=sys.stderr)
        return 3
    except (RrnnError, OSError) as e:
        print(f"rrnn: error: {e}", file=sys.stderr)
        return 2
