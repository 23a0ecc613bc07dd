#!/usr/bin/env python3
"""Benchmark the compiled kernels against the NumPy fallback.

Times the three hot kernels on the production network shape plus a full
agent training step through each backend, and reports the speedups.

    python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import time

import numpy as np

from nrsched import _kernels_np

try:
    from nrsched import _kernels
except ImportError:
    _kernels = None


def timeit(fn, repeats, warmup=50):
    for _ in range(warmup):
        fn()
    best = float("inf")
    for _ in range(5):
        t0 = time.perf_counter()
        for _ in range(repeats):
            fn()
        best = min(best, (time.perf_counter() - t0) / repeats)
    return best


def bench_kernels(repeats):
    rng = np.random.default_rng(0)
    dims = [8, 128, 128, 4]
    ws = [rng.normal(size=(dims[k + 1], dims[k])) for k in range(3)]
    bs = [rng.normal(size=(dims[k + 1],)) for k in range(3)]
    x = rng.normal(size=8)
    xs = rng.normal(size=(64, 8))
    acts = rng.integers(0, 4, 64).astype(np.intp)
    tgts = rng.normal(size=64)

    cases = [
        ("forward_one (1x8->4)", lambda impl: impl.forward_one(ws, bs, x)),
        ("batch_forward (64x8->4)", lambda impl: impl.batch_forward(ws, bs, xs)),
        ("td_backward_batch (64)", lambda impl: impl.td_backward_batch(ws, bs, xs, acts, tgts)),
    ]
    rows = []
    for name, call in cases:
        t_np = timeit(lambda: call(_kernels_np), repeats)
        t_cy = timeit(lambda: call(_kernels), repeats) if _kernels else None
        rows.append((name, t_np, t_cy))
    return rows


def bench_train_step(repeats):
    """Full DQN training step through each backend (forced via monkeypatching
    the backend module, which every caller goes through)."""
    from nrsched import backend, dqn

    results = []
    impls = [("numpy", _kernels_np)] + ([("compiled", _kernels)] if _kernels else [])
    saved = (backend.forward_one, backend.batch_forward, backend.td_backward_batch)
    try:
        for name, impl in impls:
            backend.forward_one = impl.forward_one
            backend.batch_forward = impl.batch_forward
            backend.td_backward_batch = impl.td_backward_batch
            hp = dqn.DqnHyperparams(replay_capacity=10_000)
            agent = dqn.Agent.fresh([8, 128, 128, 4], hp, seed=0)
            rng = np.random.default_rng(0)
            for i in range(200):
                s = rng.random(8)
                agent.replay.push(dqn.Transition(s, int(rng.integers(4)), float(rng.random()), rng.random(8)))
            t = timeit(lambda: dqn.train_step(agent, hp, rng), repeats, warmup=20)
            results.append((name, t))
    finally:
        backend.forward_one, backend.batch_forward, backend.td_backward_batch = saved
    return results


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=2000)
    args = parser.parse_args()

    if _kernels is None:
        print("compiled extension not available; timing the NumPy fallback only\n")

    print(f"{'kernel':28s} {'numpy':>12s} {'compiled':>12s} {'speedup':>9s}")
    for name, t_np, t_cy in bench_kernels(args.repeats):
        cy = f"{t_cy * 1e6:9.1f} us" if t_cy else "-"
        speedup = f"{t_np / t_cy:8.2f}x" if t_cy else "-"
        print(f"{name:28s} {t_np * 1e6:9.1f} us {cy:>12s} {speedup:>9s}")

    print()
    steps = bench_train_step(max(200, args.repeats // 10))
    base = steps[0][1]
    for name, t in steps:
        extra = f" ({base / t:.2f}x vs numpy)" if name != "numpy" else ""
        print(f"train_step [{name:8s}]  {t * 1e6:9.1f} us{extra}")


if __name__ == "__main__":
    main()
