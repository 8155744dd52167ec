"""Backpropagation through time for the combined training objective.

The error flowing into a hidden state s_t has three sources: the decoder path
(reconstruction and sequence terms, through V), the classifier path (through
G), and the recurrent path from s_{t+1} (through W).  The sequence term
spreads 1/T of the global residual onto every decoded output.  Sequences here
are short, so the recurrence is unrolled in full.
"""

from dataclasses import dataclass

from . import linalg
from .errors import MissingFieldError, ShapeError
from .linalg import Matrix, Vector
from .model import ModelParams, SequenceSample, class_posterior, forward, total_loss


@dataclass
class Gradients:
    """One tensor per parameter, shape-congruent with the ModelParams."""

    dU: Matrix
    dW: Matrix
    db1: Vector
    dV: Matrix
    db2: Vector
    dG: Matrix | None = None
    db3: Vector | None = None

    @classmethod
    def zeros_like(cls, p: ModelParams):
        return cls(
            dU=Matrix.zeros(p.h, p.d),
            dW=Matrix.zeros(p.h, p.h),
            db1=Vector.zeros(p.h),
            dV=Matrix.zeros(p.d, p.h),
            db2=Vector.zeros(p.d),
            dG=Matrix.zeros(p.c, p.h) if p.c else None,
            db3=Vector.zeros(p.c) if p.c else None,
        )

    def tensors(self):
        yield "U", self.dU
        yield "W", self.dW
        yield "b1", self.db1
        yield "V", self.dV
        yield "b2", self.db2
        if self.dG is not None:
            yield "G", self.dG
            yield "b3", self.db3

    def accumulate(self, other, scale=1.0):
        """self += scale * other, tensor by tensor."""
        for (_, mine), (_, theirs) in zip(self.tensors(), other.tensors()):
            linalg._backend.kernels.axpy(scale, theirs.data, mine.data, len(mine.data))

    def rescale(self, s):
        for _, t in self.tensors():
            for i in range(len(t.data)):
                t.data[i] *= s


def backward(
    sample: SequenceSample,
    p: ModelParams,
    trace,
    alpha: float,
    beta: float,
) -> Gradients:
    """Exact gradient of the combined loss for one sample.

    ``trace`` must be the forward trace of (sample, p); mismatched lengths or
    widths are rejected.
    """
    t_steps = sample.steps
    if trace.steps != t_steps:
        raise ShapeError(f"trace has {trace.steps} steps, sample has {t_steps}")
    if t_steps and (len(trace.hidden[0]) != p.h or len(trace.decoded[0]) != p.d):
        raise ShapeError("trace widths do not match the model dimensions")

    f2_active = alpha > 0
    f3_active = beta > 0
    if f2_active and sample.global_target is None:
        raise MissingFieldError("alpha > 0 requires a global_target on the sample")
    if f3_active and sample.label is None:
        raise MissingFieldError("beta > 0 requires a label on the sample")

    g = Gradients.zeros_like(p)

    glob = None
    if f2_active:
        mean_dec = linalg.mean_of(trace.decoded)
        glob = linalg.sub(mean_dec, sample.global_target)
        glob = linalg.scale(glob, 2.0 * alpha / t_steps)

    carry = Vector.zeros(p.h)  # W^T-propagated error from step t+1
    for t in reversed(range(t_steps)):
        s_t = trace.hidden[t]
        x_dec = trace.decoded[t]

        d_state = Vector.zeros(p.h)

        # decoder path: f1 residual plus the distributed f2 residual
        d_out = Vector.zeros(p.d)
        has_decoder_error = False
        if sample.targets is not None:
            linalg.add_scaled_diff_into(x_dec, sample.targets[t], 2.0, d_out)
            has_decoder_error = True
        if glob is not None:
            linalg.axpy_into(1.0, glob, d_out)
            has_decoder_error = True
        if has_decoder_error:
            d_pre = Vector.zeros(p.d)
            linalg.tanh_backprop_into(d_out, x_dec, d_pre)
            linalg.outer_add_into(g.dV, d_pre, s_t)
            linalg.axpy_into(1.0, d_pre, g.db2)
            linalg.matvec_t_add_into(p.V, d_pre, d_state)

        # classifier path: softmax cross-entropy against the true label
        if f3_active:
            post = class_posterior(s_t, p)
            d_logits = linalg.scale(post, beta)
            d_logits.data[sample.label] -= beta
            linalg.outer_add_into(g.dG, d_logits, s_t)
            linalg.axpy_into(1.0, d_logits, g.db3)
            linalg.matvec_t_add_into(p.G, d_logits, d_state)

        # recurrent path
        linalg.axpy_into(1.0, carry, d_state)
        d_pre_state = Vector.zeros(p.h)
        linalg.tanh_backprop_into(d_state, s_t, d_pre_state)
        linalg.outer_add_into(g.dU, d_pre_state, sample.inputs[t])
        s_prev = trace.hidden[t - 1] if t > 0 else trace.s0
        linalg.outer_add_into(g.dW, d_pre_state, s_prev)
        linalg.axpy_into(1.0, d_pre_state, g.db1)
        carry = linalg.matvec_t(p.W, d_pre_state)

    return g


@dataclass
class GradCheckResult:
    max_err: float
    worst_param: str
    worst_index: int
    analytic: float
    numeric: float


def grad_check_detail(
    sample: SequenceSample,
    p: ModelParams,
    alpha: float,
    beta: float,
    step: float = 1e-5,
    corrupt: str | None = None,
) -> GradCheckResult:
    """Compare analytic gradients against central differences, entry by entry.

    The error measure is |analytic - numeric| / max(1, |analytic| + |numeric|);
    the clamped denominator keeps near-zero gradients from blowing the ratio
    up.  ``corrupt`` names a gradient tensor to offset by +1, as a self-test
    that the checker actually detects wrong gradients.
    """
    if step <= 0:
        raise ValueError("finite-difference step must be positive")
    work = p.copy()
    trace = forward(sample, work)
    analytic = backward(sample, work, trace, alpha, beta)
    if corrupt is not None:
        tensor = dict(analytic.tensors()).get(corrupt.lstrip("d"))
        if tensor is None:
            raise ValueError(f"no gradient tensor named {corrupt!r}")
        for i in range(len(tensor.data)):
            tensor.data[i] += 1.0

    worst = GradCheckResult(0.0, "", -1, 0.0, 0.0)
    for (name, tensor), (_, grad) in zip(work.tensors(), analytic.tensors()):
        buf = tensor.data
        for i in range(len(buf)):
            saved = buf[i]
            buf[i] = saved + step
            loss_plus = total_loss(sample, work, alpha, beta).total
            buf[i] = saved - step
            loss_minus = total_loss(sample, work, alpha, beta).total
            buf[i] = saved
            numeric = (loss_plus - loss_minus) / (2.0 * step)
            a = grad.data[i]
            err = abs(a - numeric) / max(1.0, abs(a) + abs(numeric))
            if err > worst.max_err:
                worst = GradCheckResult(err, name, i, a, numeric)
    return worst


def grad_check(
    sample: SequenceSample, p: ModelParams, alpha: float, beta: float, step: float = 1e-5
) -> float:
    """Worst relative disagreement between analytic and numeric gradients."""
    return grad_check_detail(sample, p, alpha, beta, step).max_err
