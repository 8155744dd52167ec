"""Compare the pure-Python and compiled kernel backends.

Times the individual hot kernels and a full forward/backward pass on a
desk-scale model, printing one row per operation with the speedup.

    python3 benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import random
import time
from array import array

from rrnn import linalg
from rrnn._backend import available
from rrnn.bptt import backward
from rrnn.linalg import Vector
from rrnn.model import SequenceSample, forward
from rrnn.optim import init_params


def buf(rng, n):
    return array("d", [rng.uniform(-1, 1) for _ in range(n)])


def time_call(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_cases(rng, h=64, d=16):
    a = buf(rng, h * d)
    wsq = buf(rng, h * h)
    x = buf(rng, d)
    hv = buf(rng, h)
    out_h = buf(rng, h)
    out_d = buf(rng, d)
    m1 = buf(rng, h * h)
    m2 = buf(rng, h * h)
    m3 = buf(rng, h * h)
    grad = buf(rng, h * h)
    vel = buf(rng, h * h)
    madam = buf(rng, h * h)
    vadam = buf(rng, h * h)
    return [
        ("matvec_add 64x16", lambda k: k.matvec_add(a, x, out_h, h, d), 2000),
        ("matvec_t_add 64x64", lambda k: k.matvec_t_add(wsq, hv, out_h, h, h), 2000),
        ("matmul 64x64x64", lambda k: k.matmul(m1, m2, m3, h, h, h), 50),
        ("tanh_inplace 4096", lambda k: k.tanh_inplace(m3, h * h), 500),
        ("outer_add 64x64", lambda k: k.outer_add(grad, hv, out_h, h, h), 2000),
        ("sgd_update 4096", lambda k: k.sgd_update(m1, vel, grad, 1e-3, 0.9, h * h), 500),
        (
            "adam_update 4096",
            lambda k: k.adam_update(
                m1, madam, vadam, grad, 1e-3, 0.9, 0.999, 1e-8, 0.1, 0.001, h * h
            ),
            500,
        ),
    ]


def forward_backward_case(rng, d=16, h=64, c=20, steps=4):
    p = init_params(d, h, c, seed=1)
    mk = lambda: Vector([rng.uniform(-0.9, 0.9) for _ in range(d)])
    sample = SequenceSample(
        inputs=[mk() for _ in range(steps)],
        targets=[mk() for _ in range(steps)],
        global_target=mk(),
        label=3,
    )

    def run():
        trace = forward(sample, p)
        backward(sample, p, trace, 0.1, 1.0)

    return run


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeats", type=int, default=5)
    args = ap.parse_args()

    backends = available()
    if "compiled" not in backends:
        print("compiled backend unavailable; timing pure Python only")
    rng = random.Random(0)
    rows = []
    from rrnn import _backend

    for name, fn, inner in kernel_cases(rng):
        times = {}
        for b in backends:
            prev = linalg.set_backend(b)
            k = _backend.kernels

            def loop():
                for _ in range(inner):
                    fn(k)

            times[b] = time_call(loop, args.repeats) / inner
            linalg.set_backend(prev)
        rows.append((name, times))

    fb_times = {}
    for b in backends:
        prev = linalg.set_backend(b)
        run = forward_backward_case(rng)

        def loop():
            for _ in range(20):
                run()

        fb_times[b] = time_call(loop, args.repeats) / 20
        linalg.set_backend(prev)
    rows.append(("forward+backward d16 h64 c20 T4", fb_times))

    width = max(len(r[0]) for r in rows)
    header = f"{'operation':<{width}}  {'python':>12}"
    if "compiled" in backends:
        header += f"  {'compiled':>12}  {'speedup':>8}"
    print(header)
    for name, times in rows:
        line = f"{name:<{width}}  {times['python'] * 1e6:>10.2f}us"
        if "compiled" in times:
            speed = times["python"] / times["compiled"] if times["compiled"] else 0.0
            line += f"  {times['compiled'] * 1e6:>10.2f}us  {speed:>7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
