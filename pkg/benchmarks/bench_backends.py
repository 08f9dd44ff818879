#!/usr/bin/env python3
"""Compare the compiled kernel against the numpy fallback.

Both backends share the counter-addressed substream contract, so outputs are
identical; this script reports the wall-time ratio on the hot excursion loop
and on the trial-sweep kernels.

Usage: python benchmarks/bench_backends.py [n_excursions]
"""

import sys
import time

import numpy as np

from krick import engine
from krick.model import ModelParams, build_model


def timed(backend, kname, n, **kw):
    t0 = time.perf_counter()
    out = engine.run_kernel(kname, n, workers=1, backend=backend, **kw)
    dt = time.perf_counter() - t0
    return out, dt


def main():
    n = int(float(sys.argv[1])) if len(sys.argv) > 1 else 50_000
    model = build_model(ModelParams(p=1.5))
    spec = model.law.kernel_spec()

    jobs = [
        ("tail_kernel", n, dict(
            spec=spec, seed=7, stream=0xA1, tau_stop=1.2e4, step_cap=10 ** 8,
            edges=10.0 ** (np.arange(33) / 8.0),
            anchors=10.0 ** (2 + np.arange(17) / 8.0),
            n_sub=16, sub_w=0.25, store_upto=0)),
        ("mixing_kernel", max(n // 10, 1000), dict(
            spec=spec, seed=9, stream=0xA5, t_grid=np.array([100.0, 1000.0]),
            a1=0.0, a2=1.0, b1=0.0, b2=1.0, cumA_p=np.array([1.0]),
            cumA_n=np.array([1], dtype=np.int64),
            B_ns=np.array([1], dtype=np.int64), step_cap=10 ** 8)),
    ]

    backends = ["python"]
    if engine.backend_name() == "cython":
        backends.insert(0, "cython")
    print(f"{'kernel':<16} {'units':>9} " +
          " ".join(f"{b:>12}" for b in backends) + "  ratio   steps/s(best)")
    for kname, units, kw in jobs:
        times = {}
        sums = {}
        for b in backends:
            out, dt = timed(b, kname, units, **kw)
            times[b] = dt
            sums[b] = out.get("sum_steps", 0)
        ratio = (times.get("python", float("nan"))
                 / times.get("cython", times["python"]))
        best = min(times.values())
        steps = sums[backends[0]]
        rate = steps / best if steps else float("nan")
        print(f"{kname:<16} {units:>9} " +
              " ".join(f"{times[b]:>11.2f}s" for b in backends) +
              f"  {ratio:5.1f}x  {rate:,.0f}" if steps else
              f"{kname:<16} {units:>9} " +
              " ".join(f"{times[b]:>11.2f}s" for b in backends) +
              f"  {ratio:5.1f}x")


if __name__ == "__main__":
    main()
