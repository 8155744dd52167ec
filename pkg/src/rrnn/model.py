"""The recurrent regression network: forward pass and its three loss terms.

One timestep encodes the input into a hidden state and decodes it back into
feature space:

    s_t = tanh(U x_t + W s_{t-1} + b1)        (encoder, s_0 = 0)
    x~_t = tanh(V s_t + b2)                   (decoder)

The training objective combines
  f1  per-step reconstruction error against the target sequence,
  f2  distance between a global target and the mean of the decoded outputs,
  f3  negative log-likelihood of the true class under a softmax head applied
      to the hidden states (never to the decoded outputs),
as  total = f1 + alpha*f2 + beta*f3.
"""

import math
from dataclasses import dataclass, field

from . import linalg
from .errors import DataError, MissingFieldError, NoHeadError, ShapeError
from .linalg import Matrix, Vector


@dataclass
class ModelParams:
    """Learnable tensors; shapes are fixed by (d, h, c), c == 0 means no head."""

    d: int
    h: int
    c: int
    U: Matrix  # h x d
    W: Matrix  # h x h
    b1: Vector  # h
    V: Matrix  # d x h
    b2: Vector  # d
    G: Matrix | None = None  # c x h
    b3: Vector | None = None  # c

    def __post_init__(self):
        if self.U.shape() != (self.h, self.d):
            raise ShapeError(f"U must be {self.h}x{self.d}, got {self.U.shape()}")
        if self.W.shape() != (self.h, self.h):
            raise ShapeError(f"W must be {self.h}x{self.h}, got {self.W.shape()}")
        if len(self.b1) != self.h:
            raise ShapeError(f"b1 must have length {self.h}, got {len(self.b1)}")
        if self.V.shape() != (self.d, self.h):
            raise ShapeError(f"V must be {self.d}x{self.h}, got {self.V.shape()}")
        if len(self.b2) != self.d:
            raise ShapeError(f"b2 must have length {self.d}, got {len(self.b2)}")
        if self.c == 0:
            if self.G is not None or self.b3 is not None:
                raise ShapeError("G/b3 must be absent when c == 0")
        else:
            if self.G is None or self.b3 is None:
                raise ShapeError("G/b3 must be present when c > 0")
            if self.G.shape() != (self.c, self.h):
                raise ShapeError(f"G must be {self.c}x{self.h}, got {self.G.shape()}")
            if len(self.b3) != self.c:
                raise ShapeError(f"b3 must have length {self.c}, got {len(self.b3)}")

    @classmethod
    def zeros(cls, d, h, c=0):
        return cls(
            d=d,
            h=h,
            c=c,
            U=Matrix.zeros(h, d),
            W=Matrix.zeros(h, h),
            b1=Vector.zeros(h),
            V=Matrix.zeros(d, h),
            b2=Vector.zeros(d),
            G=Matrix.zeros(c, h) if c else None,
            b3=Vector.zeros(c) if c else None,
        )

    def tensors(self):
        """(name, tensor) pairs in serialization order; head tensors only when present."""
        yield "U", self.U
        yield "W", self.W
        yield "b1", self.b1
        yield "V", self.V
        yield "b2", self.b2
        if self.c:
            yield "G", self.G
            yield "b3", self.b3

    def copy(self):
        return ModelParams(
            d=self.d,
            h=self.h,
            c=self.c,
            U=self.U.copy(),
            W=self.W.copy(),
            b1=self.b1.copy(),
            V=self.V.copy(),
            b2=self.b2.copy(),
            G=self.G.copy() if self.G is not None else None,
            b3=self.b3.copy() if self.b3 is not None else None,
        )

    def is_finite(self):
        return all(t.is_finite() for _, t in self.tensors())


@dataclass
class SequenceSample:
    """One training or evaluation unit.

    ``targets`` drive f1, ``global_target`` drives f2, ``label`` drives f3;
    each may be absent when the corresponding term is unused.
    """

    inputs: list[Vector]
    targets: list[Vector] | None = None
    global_target: Vector | None = None
    label: int | None = None
    sample_id: str = ""

    def __post_init__(self):
        if not self.inputs:
            raise DataError("sequence sample needs at least one input")
        if self.targets is not None and len(self.targets) != len(self.inputs):
            raise DataError(
                f"targets length {len(self.targets)} != inputs length {len(self.inputs)}"
            )

    @property
    def steps(self):
        return len(self.inputs)


@dataclass
class ForwardTrace:
    """Everything the backward pass needs: all hidden states and decodings."""

    s0: Vector
    hidden: list[Vector]
    decoded: list[Vector]

    @property
    def steps(self):
        return len(self.hidden)


@dataclass
class LossBreakdown:
    f1: float
    f2: float
    f3: float
    alpha: float
    beta: float
    total: float = field(init=False)

    def __post_init__(self):
        self.total = self.f1 + self.alpha * self.f2 + self.beta * self.f3


def encode_step(x_t: Vector, s_prev: Vector, p: ModelParams) -> Vector:
    """s_t = tanh(U x_t + W s_prev + b1)."""
    if len(x_t) != p.d:
        raise ShapeError(f"input length {len(x_t)} != model d={p.d}")
    if len(s_prev) != p.h:
        raise ShapeError(f"state length {len(s_prev)} != model h={p.h}")
    s = p.b1.copy()
    linalg.matvec_add_into(p.U, x_t, s)
    linalg.matvec_add_into(p.W, s_prev, s)
    linalg.tanh_into(s)
    return s


def decode_step(s_t: Vector, p: ModelParams) -> Vector:
    """x~_t = tanh(V s_t + b2)."""
    if len(s_t) != p.h:
        raise ShapeError(f"state length {len(s_t)} != model h={p.h}")
    x = p.b2.copy()
    linalg.matvec_add_into(p.V, s_t, x)
    linalg.tanh_into(x)
    return x


def forward(sample: SequenceSample, p: ModelParams) -> ForwardTrace:
    """Run the recurrent encoding-decoding over the whole input sequence."""
    s0 = Vector.zeros(p.h)
    hidden = []
    decoded = []
    s = s0
    for x_t in sample.inputs:
        s = encode_step(x_t, s, p)
        hidden.append(s)
        decoded.append(decode_step(s, p))
    return ForwardTrace(s0=s0, hidden=hidden, decoded=decoded)


def loss_reconstruction(trace: ForwardTrace, targets: list[Vector]) -> float:
    """f1: summed squared reconstruction error over all timesteps."""
    if len(targets) != trace.steps:
        raise ShapeError(f"{len(targets)} targets for a {trace.steps}-step trace")
    return math.fsum(
        linalg.frob_sq_diff(want, got) for want, got in zip(targets, trace.decoded)
    )


def loss_sequence(trace: ForwardTrace, global_target: Vector) -> float:
    """f2: squared distance of the decoded-output mean from the global target."""
    return linalg.frob_sq_diff(global_target, linalg.mean_of(trace.decoded))


def class_posterior(s_t: Vector, p: ModelParams) -> Vector:
    """softmax(G s_t + b3): probability over the c classes for one hidden state."""
    if p.c == 0:
        raise NoHeadError("model has no classifier head (c == 0)")
    z = p.b3.copy()
    linalg.matvec_add_into(p.G, s_t, z)
    return linalg.softmax(z)


def loss_discriminative(trace: ForwardTrace, label: int, p: ModelParams) -> float:
    """f3: negative log-likelihood of the true label, summed over timesteps.

    Supervision reads the hidden states only, so decoder parameters never
    receive gradient from this term.
    """
    if p.c == 0:
        raise NoHeadError("model has no classifier head (c == 0)")
    if not 0 <= label < p.c:
        raise DataError(f"label {label} out of range for {p.c} classes")
    total = 0.0
    for s_t in trace.hidden:
        total -= math.log(class_posterior(s_t, p)[label])
    return total


def losses_from_trace(
    sample: SequenceSample, trace: ForwardTrace, p: ModelParams, alpha: float, beta: float
) -> LossBreakdown:
    """Evaluate the loss terms on an existing trace; see total_loss for the rules."""
    f1 = loss_reconstruction(trace, sample.targets) if sample.targets is not None else 0.0
    if alpha > 0 and sample.global_target is None:
        raise MissingFieldError("alpha > 0 requires a global_target on the sample")
    if beta > 0 and sample.label is None:
        raise MissingFieldError("beta > 0 requires a label on the sample")
    f2 = (
        loss_sequence(trace, sample.global_target)
        if sample.global_target is not None
        else 0.0
    )
    f3 = (
        loss_discriminative(trace, sample.label, p)
        if beta > 0 and sample.label is not None
        else 0.0
    )
    return LossBreakdown(f1=f1, f2=f2, f3=f3, alpha=alpha, beta=beta)


def total_loss(
    sample: SequenceSample, p: ModelParams, alpha: float, beta: float
) -> LossBreakdown:
    """Forward the sample and combine the loss terms.

    f1 is active whenever the sample carries targets; f2 requires alpha > 0
    (and a global_target); f3 requires beta > 0 (and a label plus a head).
    Inactive terms report 0, except f2 whose raw value is still reported when
    a global_target is present, since it costs nothing and aids monitoring.
    """
    trace = forward(sample, p)
    return losses_from_trace(sample, trace, p, alpha, beta)
