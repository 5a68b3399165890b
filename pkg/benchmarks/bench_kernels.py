"""Timing comparison of the numba kernels against their numpy fallbacks.

Run from the repo root:

    python3 benchmarks/bench_kernels.py [--repeats 30]

The active backend follows ALEE_NUMBA (auto-detect when unset); with
the numba path unavailable both columns time the same numpy code.
"""

from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from alee import kernels


def bench(fn, args, repeats, warmup=3):
    for _ in range(warmup):
        fn(*args)
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def workloads(rng):
    g, nq, nk, d, dv = 8, 16, 48, 32, 32
    q = rng.standard_normal((g, nq, d))
    k = rng.standard_normal((g, nk, d))
    v = rng.standard_normal((g, nk, dv))
    mask = np.ones((g, nk))
    mask[:, 40:] = 0.0
    out, attn = kernels.attn_forward(q, k, v, mask)
    g_out = rng.standard_normal(out.shape)

    logits = rng.standard_normal((600, 13))
    logp = kernels.log_softmax(logits)
    g_lp = rng.standard_normal(logp.shape)

    bio = rng.integers(0, 13, size=400).astype(np.int64)
    pts = rng.standard_normal((1500, 32))
    min_dist = np.full(1500, np.inf)

    return [
        ("attn_forward", (q, k, v, mask), ("attn_forward",)),
        ("attn_backward", (g_out, attn, q, k, v), ("attn_backward",)),
        ("log_softmax", (logits,), ("log_softmax",)),
        ("log_softmax_backward", (g_lp, logp), ("log_softmax_backward",)),
        ("spans_from_bio", (bio, 6), ("spans_from_bio",)),
        ("repair_bio", (bio,), ("repair_bio",)),
        ("kcenter_greedy", (pts, min_dist, 50), ("kcenter_greedy",)),
    ]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=30)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    numpy_fns = kernels.numpy_impls()
    print(f"active backend: {kernels.BACKEND}")
    print(f"{'kernel':<22}{kernels.BACKEND:>12}{'numpy':>12}{'speedup':>10}")
    for name, fn_args, (key,) in workloads(rng):
        fast = bench(getattr(kernels, name), fn_args, args.repeats)
        slow = bench(numpy_fns[key], fn_args, args.repeats)
        print(f"{name:<22}{fast * 1e6:>10.1f}us{slow * 1e6:>10.1f}us"
              f"{slow / fast:>9.1f}x")


if __name__ == "__main__":
    main()
