"""Parameter initialization, optimizer updates, and the training loop.

Training minimizes the mean of f1 + alpha*f2 + beta*f3 over a dataset with
mini-batch mean gradients.  Given the same config and dataset the run is
bit-reproducible in single-threaded mode; with a thread pool the per-sample
passes run against a frozen parameter snapshot and are accumulated in a
fixed order, so results still reproduce in practice.
"""

import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import linalg
from .bptt import Gradients, backward
from .errors import DataError, MissingFieldError, NumericError, ShapeError
from .linalg import Matrix, Vector
from .model import ModelParams, SequenceSample, forward, losses_from_trace

_OPTIMIZERS = ("sgd", "adam")


@dataclass
class TrainConfig:
    """Hyperparameters for train(); defaults are sized for desk-scale runs."""

    alpha: float = 0.0
    beta: float = 0.0
    hidden: int = 64
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    momentum: float = 0.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 8
    epochs: int = 200
    seed: int = 0
    init_scale: float = 1.0
    classes: int = 0  # softmax head width; 0 trains without a head
    threads: int = 1

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise DataError("alpha and beta must be >= 0")
        if self.hidden < 1:
            raise DataError("hidden must be >= 1")
        if self.optimizer not in _OPTIMIZERS:
            raise DataError(f"unknown optimizer {self.optimizer!r}")
        # 0 is allowed so a no-op run can serve as a baseline
        if self.learning_rate < 0:
            raise DataError("learning_rate must be >= 0")
        if not 0.0 <= self.momentum < 1.0:
            raise DataError("momentum must be in [0, 1)")
        if not (0.0 < self.adam_beta1 < 1.0 and 0.0 < self.adam_beta2 < 1.0):
            raise DataError("adam betas must be in (0, 1)")
        if self.epsilon <= 0:
            raise DataError("epsilon must be > 0")
        if self.batch_size < 1:
            raise DataError("batch_size must be >= 1")
        if self.epochs < 1:
            raise DataError("epochs must be >= 1")
        if self.init_scale < 0:
            raise DataError("init_scale must be >= 0")
        if self.classes < 0:
            raise DataError("classes must be >= 0")
        if self.beta > 0 and self.classes < 1:
            raise DataError("beta > 0 requires classes >= 1")
        if self.threads < 1:
            raise DataError("threads must be >= 1")


@dataclass
class EpochRecord:
    """Loss terms averaged over the samples as they were visited."""

    f1: float
    f2: float
    f3: float
    total: float

    def is_finite(self):
        return all(math.isfinite(v) for v in (self.f1, self.f2, self.f3, self.total))


@dataclass
class TrainHistory:
    records: list[EpochRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def totals(self):
        return [r.total for r in self.records]


def init_params(d, h, c, seed, init_scale=1.0) -> ModelParams:
    """Draw weights uniform on [-init_scale/sqrt(fan_in), +init_scale/sqrt(fan_in)].

    Biases start at zero.  The draw order is U, W, V, G, row-major within
    each matrix, so the result is a pure function of (d, h, c, seed,
    init_scale).
    """
    if d < 1 or h < 1:
        raise DataError("d and h must be >= 1")
    if c < 0:
        raise DataError("c must be >= 0")
    if init_scale < 0:
        raise DataError("init_scale must be >= 0")
    rng = random.Random(seed)

    def draw(rows, cols, fan_in):
        bound = init_scale / math.sqrt(fan_in)
        m = Matrix.zeros(rows, cols)
        for i in range(rows * cols):
            m.data[i] = rng.uniform(-bound, bound)
        return m

    u = draw(h, d, d)
    w = draw(h, h, h)
    v = draw(d, h, h)
    g = draw(c, h, h) if c else None
    return ModelParams(
        d=d,
        h=h,
        c=c,
        U=u,
        W=w,
        b1=Vector.zeros(h),
        V=v,
        b2=Vector.zeros(d),
        G=g,
        b3=Vector.zeros(c) if c else None,
    )


def _buffers_like(p: ModelParams):
    return {name: Vector.zeros(len(t.data)).data for name, t in p.tensors()}


@dataclass
class SgdState:
    velocity: dict

    @classmethod
    def zeros_like(cls, p: ModelParams):
        return cls(velocity=_buffers_like(p))


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def zeros_like(cls, p: ModelParams):
        return cls(m=_buffers_like(p), v=_buffers_like(p))


def _pairs(p: ModelParams, g: Gradients):
    pt = list(p.tensors())
    gt = list(g.tensors())
    if len(pt) != len(gt):
        raise ShapeError("params and gradients disagree on head presence")
    for (name, a), (_, b) in zip(pt, gt):
        if len(a.data) != len(b.data):
            raise ShapeError(
                f"{name}: param has {len(a.data)} entries, gradient has {len(b.data)}"
            )
        yield name, a, b


def sgd_step(p: ModelParams, g: Gradients, lr, state: SgdState, momentum=0.0):
    """Classical momentum: v <- momentum*v - lr*g; p <- p + v.  In place."""
    k = linalg._backend.kernels
    for name, pt, gt in _pairs(p, g):
        k.sgd_update(pt.data, state.velocity[name], gt.data, lr, momentum, len(pt.data))
    return p, state


def adam_step(p, g, state: AdamState, lr, beta1=0.9, beta2=0.999, eps=1e-8, t=1):
    """Bias-corrected Adam; ``t`` is the 1-based update count.  In place."""
    if t < 1:
        raise DataError("adam step count t must be >= 1")
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    k = linalg._backend.kernels
    for name, pt, gt in _pairs(p, g):
        k.adam_update(
            pt.data, state.m[name], state.v[name], gt.data,
            lr, beta1, beta2, eps, bc1, bc2, len(pt.data),
        )
    state.t = t
    return p, state


def _check_dataset(dataset, cfg):
    if not dataset:
        raise DataError("training dataset is empty")
    d = len(dataset[0].inputs[0])
    for i, s in enumerate(dataset):
        if len(s.inputs[0]) != d:
            raise DataError(
                f"sample {i} has dimension {len(s.inputs[0])}, expected {d}"
            )
        if s.targets is None:
            raise MissingFieldError(f"sample {i} has no target sequence")
        if cfg.alpha > 0 and s.global_target is None:
            raise MissingFieldError(f"sample {i} has no global_target but alpha > 0")
        if cfg.beta > 0 and s.label is None:
            raise MissingFieldError(f"sample {i} has no label but beta > 0")
        if s.label is not None and cfg.classes and not 0 <= s.label < cfg.classes:
            raise DataError(
                f"sample {i} label {s.label} outside 0..{cfg.classes - 1}"
            )
    return d


def _sample_pass(sample, params, alpha, beta):
    trace = forward(sample, params)
    losses = losses_from_trace(sample, trace, params, alpha, beta)
    grads = backward(sample, params, trace, alpha, beta)
    return losses, grads


def train(dataset, cfg: TrainConfig, on_epoch=None):
    """Run the epoch loop and return (params, history).

    ``on_epoch`` is called as on_epoch(epoch_index, record) after each epoch,
    which is how the CLI reports progress.  Raises NumericError as soon as a
    loss or parameter stops being finite.
    """
    d = _check_dataset(dataset, cfg)
    params = init_params(d, cfg.hidden, cfg.classes, cfg.seed, cfg.init_scale)
    state = (
        SgdState.zeros_like(params)
        if cfg.optimizer == "sgd"
        else AdamState.zeros_like(params)
    )
    rng = random.Random(cfg.seed)
    order = list(range(len(dataset)))
    pool = ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
    history = TrainHistory()
    step = 0
    try:
        for epoch in range(cfg.epochs):
            rng.shuffle(order)
            sums = [0.0, 0.0, 0.0, 0.0]
            for start in range(0, len(order), cfg.batch_size):
                batch = [dataset[i] for i in order[start : start + cfg.batch_size]]
                if pool is not None and len(batch) > 1:
                    # snapshot semantics: every pass reads the same params,
                    # accumulation below keeps dataset order
                    results = list(
                        pool.map(
                            lambda s: _sample_pass(s, params, cfg.alpha, cfg.beta),
                            batch,
                        )
                    )
                else:
                    results = [
                        _sample_pass(s, params, cfg.alpha, cfg.beta) for s in batch
                    ]
                acc = Gradients.zeros_like(params)
                inv = 1.0 / len(batch)
                for losses, grads in results:
                    acc.accumulate(grads, scale=inv)
                    sums[0] += losses.f1
                    sums[1] += losses.f2
                    sums[2] += losses.f3
                    sums[3] += losses.total
                step += 1
                if cfg.optimizer == "sgd":
                    sgd_step(params, acc, cfg.learning_rate, state, cfg.momentum)
                else:
                    adam_step(
                        params, acc, state,
                        cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                        cfg.epsilon, step,
                    )
            n = len(dataset)
            record = EpochRecord(
                f1=sums[0] / n, f2=sums[1] / n, f3=sums[2] / n, total=sums[3] / n
            )
            if not record.is_finite() or not params.is_finite():
                raise NumericError(
                    f"non-finite loss or parameter at epoch {epoch + 1}; "
                    "lower the learning rate"
                )
            history.records.append(record)
            if on_epoch is not None:
                on_epoch(epoch, record)
    finally:
        if pool is not None:
            pool.shutdown(wait=False)
    return params, history
