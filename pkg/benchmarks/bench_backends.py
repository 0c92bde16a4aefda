#!/usr/bin/env python3
"""Benchmark the session-scan backends: numba-compiled vs interpreted.

Both backends run the identical kernel source, so outputs are checked for
exact equality before timing. Compilation is excluded via a warmup pass.

    python benchmarks/bench_backends.py --sessions 500000 --repeats 5
"""

import argparse
import time

import numpy as np

from latgov import backends
from latgov.simulator import SimConfig, simulate_paths


def run_once(cfg, backend):
    start = time.perf_counter()
    trace = simulate_paths(cfg, backend=backend)
    return time.perf_counter() - start, trace


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--sessions", type=int, default=500_000)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    cfg = SimConfig(sessions=args.sessions, seed=args.seed)
    names = ["numpy"]
    if backends.numba_available():
        names.insert(0, "numba")
    else:
        print("numba not importable; benchmarking the interpreted backend only")

    # Warmup (triggers JIT compilation) and cross-backend equality check.
    warm_cfg = SimConfig(sessions=2000, seed=args.seed)
    traces = {name: run_once(warm_cfg, name)[1] for name in names}
    if len(traces) == 2:
        for field in ("perceived_s", "trust", "mode", "abandoned", "converted", "repeated"):
            a = getattr(traces["numba"], field)
            b = getattr(traces["numpy"], field)
            assert np.array_equal(a, b), f"backend mismatch in {field}"
        print("cross-backend outputs identical on warmup run")

    timings = {}
    for name in names:
        best = min(run_once(cfg, name)[0] for _ in range(args.repeats))
        timings[name] = best
        rate = args.sessions / best
        print(f"{name:>6}: {best * 1000:9.1f} ms  ({rate / 1e6:.2f} M sessions/s)")

    if len(timings) == 2:
        print(f"speedup: {timings['numpy'] / timings['numba']:.1f}x")


if __name__ == "__main__":
    main()
