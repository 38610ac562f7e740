"""Compiled vs numpy kernels on desk- and full-sized greedy and relaxed-bound problems.

    python benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from beamcharge import _kernels_py

try:
    from beamcharge import _kernels
except ImportError:
    _kernels = None

CASES = {
    # name: (policies, sensors, slots)
    "desk": (100, 5, 50),
    "medium": (1200, 10, 200),
    "full": (19200, 20, 1000),
}


def instance(policies, sensors, slots, rng):
    H = rng.random((policies, sensors)) * 2.0 / slots
    q0 = rng.uniform(0.0, 0.3, sensors)
    c = q0 / (2.0 * slots)
    return H, q0, c


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--cases", nargs="+", default=["desk", "medium"], choices=list(CASES))
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    backends = [("python", _kernels_py)] + ([("compiled", _kernels)] if _kernels else [])
    table = np.zeros(2)
    print(f"{'case':<8} {'kernel':<16} " + " ".join(f"{b:>12}" for b, _ in backends) + "   speedup")
    for name in args.cases:
        G, N, S = CASES[name]
        H, q0, c = instance(G, N, S, rng)
        scale = 100.0 / N
        jobs = {
            "greedy_schedule": lambda k: k.greedy_schedule(H, q0, c, 1.0, S, 0, scale, table),
            "fw_p1": lambda k: k.fw_p1(H[: min(G, 400)] * S, q0 / 2, 1.0, 1.0, 0, scale, table),
        }
        for job, fn in jobs.items():
            t = [best_of(lambda: fn(k), args.repeat) for _, k in backends]
            speed = f"{t[0] / t[-1]:8.1f}x" if len(t) > 1 else "      n/a"
            print(f"{name:<8} {job:<16} " + " ".join(f"{v * 1e3:10.2f}ms" for v in t) + f" {speed}")


if __name__ == "__main__":
    main()
