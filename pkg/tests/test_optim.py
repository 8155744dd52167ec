import math
import random

import pytest

from rrnn.bptt import Gradients
from rrnn.errors import DataError, MissingFieldError, NumericError
from rrnn.linalg import Matrix, Vector
from rrnn.model import ModelParams, SequenceSample
from rrnn.optim import (
    AdamState,
    SgdState,
    TrainConfig,
    adam_step,
    init_params,
    sgd_step,
    train,
)


def flat_params(p):
    return [list(t.data) for _, t in p.tensors()]


def autoencode_dataset(rng, n, d, t, labels=None, with_global=False):
    out = []
    for i in range(n):
        xs = [Vector([rng.uniform(-0.9, 0.9) for _ in range(d)]) for _ in range(t)]
        out.append(
            SequenceSample(
                inputs=xs,
                targets=[x.copy() for x in xs],
                global_target=Vector([rng.uniform(-0.9, 0.9) for _ in range(d)])
                if with_global
                else None,
                label=labels[i] if labels is not None else None,
                sample_id=f"s{i}",
            )
        )
    return out


class TestInitParams:
    def test_deterministic(self):
        a = init_params(3, 4, 2, seed=99)
        b = init_params(3, 4, 2, seed=99)
        assert flat_params(a) == flat_params(b)

    def test_seed_changes_draw(self):
        a = init_params(3, 4, 0, seed=1)
        b = init_params(3, 4, 0, seed=2)
        assert flat_params(a) != flat_params(b)

    def test_zero_scale_gives_zero_weights(self):
        p = init_params(3, 4, 2, seed=5, init_scale=0.0)
        for _, t in p.tensors():
            assert all(v == 0.0 for v in t.data)

    def test_bound_by_construction(self):
        p = init_params(3, 4, 0, seed=7, init_scale=1.0)
        assert all(abs(v) <= 1.0 / math.sqrt(3) for v in p.U.data)
        assert all(abs(v) <= 1.0 / math.sqrt(4) for v in p.W.data)
        assert all(abs(v) <= 1.0 / math.sqrt(4) for v in p.V.data)

    def test_biases_zero_head_optional(self):
        p = init_params(2, 3, 0, seed=0)
        assert all(v == 0.0 for v in p.b1.data)
        assert all(v == 0.0 for v in p.b2.data)
        assert p.G is None and p.b3 is None
        q = init_params(2, 3, 4, seed=0)
        assert q.G.shape() == (4, 3)
        assert all(v == 0.0 for v in q.b3.data)

    def test_bad_dims_rejected(self):
        with pytest.raises(DataError):
            init_params(0, 4, 0, seed=1)


def scalar_model_and_grad(weight, grad):
    p = ModelParams(
        d=1, h=1, c=0,
        U=Matrix.from_rows([[weight]]),
        W=Matrix.from_rows([[0.0]]),
        b1=Vector([0.0]),
        V=Matrix.from_rows([[0.0]]),
        b2=Vector([0.0]),
    )
    g = Gradients.zeros_like(p)
    g.dU.data[0] = grad
    return p, g


class TestSgdStep:
    def test_zero_gradient_no_motion(self):
        p = init_params(2, 3, 0, seed=3)
        before = flat_params(p)
        g = Gradients.zeros_like(p)
        sgd_step(p, g, 0.1, SgdState.zeros_like(p), momentum=0.9)
        assert flat_params(p) == before

    def test_scalar_hand_case(self):
        p, g = scalar_model_and_grad(1.0, 2.0)
        sgd_step(p, g, 0.1, SgdState.zeros_like(p), momentum=0.0)
        assert p.U.data[0] == pytest.approx(0.8, abs=1e-15)

    def test_momentum_two_steps(self):
        # v1 = -lr*g, p1 = p0 + v1; v2 = mu*v1 - lr*g, p2 = p1 + v2
        lr, mu, g0 = 0.1, 0.5, 2.0
        p, g = scalar_model_and_grad(1.0, g0)
        st = SgdState.zeros_like(p)
        sgd_step(p, g, lr, st, momentum=mu)
        sgd_step(p, g, lr, st, momentum=mu)
        v1 = -lr * g0
        v2 = mu * v1 - lr * g0
        assert p.U.data[0] == pytest.approx(1.0 + v1 + v2, abs=1e-15)


class TestAdamStep:
    def test_zero_gradient_no_motion(self):
        p = init_params(2, 3, 2, seed=4)
        before = flat_params(p)
        g = Gradients.zeros_like(p)
        adam_step(p, g, AdamState.zeros_like(p), 0.01, t=1)
        assert flat_params(p) == before

    def test_first_step_magnitude_is_lr(self):
        p, g = scalar_model_and_grad(1.0, 3.0)
        adam_step(p, g, AdamState.zeros_like(p), 0.01, t=1)
        # m_hat = g, v_hat = g^2, so the move is lr * g/(|g| + eps) ~ lr
        assert p.U.data[0] == pytest.approx(1.0 - 0.01, abs=1e-8)

    def test_steady_state_scale_invariance(self):
        rows = [[0.0, 0.0]]
        p = ModelParams(
            d=2, h=1, c=0,
            U=Matrix.from_rows(rows),
            W=Matrix.from_rows([[0.0]]),
            b1=Vector([0.0]),
            V=Matrix.from_rows([[0.0], [0.0]]),
            b2=Vector([0.0, 0.0]),
        )
        g = Gradients.zeros_like(p)
        g.dU.data[0] = 0.01
        g.dU.data[1] = 0.1
        st = AdamState.zeros_like(p)
        for t in range(1, 301):
            adam_step(p, g, st, 0.001, t=t)
        d1, d2 = p.U.data[0], p.U.data[1]
        assert d1 < 0 and d2 < 0
        assert abs(d1 - d2) <= 1e-3 * abs(d2)

    def test_bad_step_count(self):
        p, g = scalar_model_and_grad(1.0, 1.0)
        with pytest.raises(DataError):
            adam_step(p, g, AdamState.zeros_like(p), 0.01, t=0)


class TestTrainConfig:
    def test_defaults_valid(self):
        cfg = TrainConfig()
        assert cfg.optimizer == "adam"
        assert cfg.hidden == 64

    @pytest.mark.parametrize(
        "kw",
        [
            {"epochs": 0},
            {"batch_size": 0},
            {"optimizer": "rmsprop"},
            {"learning_rate": -1.0},
            {"alpha": -0.1},
            {"adam_beta1": 1.0},
            {"epsilon": 0.0},
            {"momentum": 1.0},
            {"beta": 0.5},  # beta > 0 needs classes
            {"hidden": 0},
            {"threads": 0},
        ],
    )
    def test_invalid_rejected(self, kw):
        with pytest.raises(DataError):
            TrainConfig(**kw)


class TestTrain:
    def test_lr_zero_is_identity(self):
        rng = random.Random(10)
        data = autoencode_dataset(rng, 4, 3, 2)
        cfg = TrainConfig(
            hidden=5, optimizer="sgd", learning_rate=0.0, epochs=1, seed=11
        )
        params, history = train(data, cfg)
        assert len(history) == 1
        init = init_params(3, 5, 0, seed=11, init_scale=cfg.init_scale)
        assert flat_params(params) == flat_params(init)

    def test_loss_halves_on_tiny_dataset(self):
        rng = random.Random(12)
        data = autoencode_dataset(rng, 10, 6, 3)
        cfg = TrainConfig(
            hidden=8, optimizer="sgd", learning_rate=0.05,
            epochs=200, batch_size=10, seed=13,
        )
        _, history = train(data, cfg)
        totals = history.totals()
        assert len(totals) == 200
        assert totals[-1] < 0.5 * totals[0]

    def test_bit_reproducible(self):
        rng = random.Random(14)
        labels = [i % 3 for i in range(9)]
        data = autoencode_dataset(rng, 9, 4, 3, labels=labels, with_global=True)
        cfg = TrainConfig(
            alpha=0.1, beta=0.5, classes=3, hidden=6,
            epochs=5, batch_size=4, seed=15,
        )
        p1, h1 = train(data, cfg)
        p2, h2 = train(data, cfg)
        assert flat_params(p1) == flat_params(p2)
        assert [
            (r.f1, r.f2, r.f3, r.total) for r in h1
        ] == [(r.f1, r.f2, r.f3, r.total) for r in h2]

    def test_full_batch_descent_non_increasing(self):
        rng = random.Random(16)
        labels = [i % 2 for i in range(4)]
        data = autoencode_dataset(rng, 4, 3, 3, labels=labels, with_global=True)
        cfg = TrainConfig(
            alpha=0.1, beta=0.5, classes=2, hidden=5,
            optimizer="sgd", learning_rate=1e-3, momentum=0.0,
            epochs=100, batch_size=4, seed=17,
        )
        _, history = train(data, cfg)
        totals = history.totals()
        assert len(totals) == 100
        for prev, cur in zip(totals, totals[1:]):
            assert cur <= prev + 1e-9
        assert all(math.isfinite(v) for v in totals)

    def test_threaded_matches_serial(self):
        rng = random.Random(18)
        data = autoencode_dataset(rng, 6, 3, 2)
        base = dict(hidden=4, epochs=3, batch_size=3, seed=19)
        p1, h1 = train(data, TrainConfig(**base))
        p2, h2 = train(data, TrainConfig(threads=3, **base))
        assert flat_params(p1) == flat_params(p2)
        assert h1.totals() == h2.totals()

    def test_on_epoch_callback(self):
        rng = random.Random(20)
        data = autoencode_dataset(rng, 3, 2, 2)
        seen = []
        cfg = TrainConfig(hidden=3, epochs=4, seed=21)
        train(data, cfg, on_epoch=lambda e, r: seen.append((e, r.total)))
        assert [e for e, _ in seen] == [0, 1, 2, 3]
        assert all(math.isfinite(t) for _, t in seen)

    def test_empty_dataset_rejected(self):
        with pytest.raises(DataError):
            train([], TrainConfig())

    def test_dimension_mismatch_rejected(self):
        rng = random.Random(22)
        data = autoencode_dataset(rng, 2, 3, 2) + autoencode_dataset(rng, 1, 4, 2)
        with pytest.raises(DataError, match="dimension"):
            train(data, TrainConfig(hidden=3))

    def test_missing_targets_rejected(self):
        s = SequenceSample(inputs=[Vector([0.1, 0.2])])
        with pytest.raises(MissingFieldError):
            train([s], TrainConfig(hidden=3))

    def test_missing_labels_rejected(self):
        rng = random.Random(23)
        data = autoencode_dataset(rng, 2, 3, 2)
        cfg = TrainConfig(hidden=3, beta=1.0, classes=2)
        with pytest.raises(MissingFieldError, match="label"):
            train(data, cfg)

    def test_label_out_of_range_rejected(self):
        rng = random.Random(24)
        data = autoencode_dataset(rng, 2, 3, 2, labels=[0, 5])
        cfg = TrainConfig(hidden=3, beta=1.0, classes=2)
        with pytest.raises(DataError, match="label"):
            train(data, cfg)

    def test_non_finite_loss_raises_numeric_error(self):
        xs = [Vector([0.1, 0.2])]
        bad = SequenceSample(inputs=xs, targets=[Vector([math.inf, 0.0])])
        with pytest.raises(NumericError):
            train([bad], TrainConfig(hidden=3, epochs=5))
