"""Benchmark the compiled kernels against the pure-numpy fallback.

Run:  python benchmarks/bench_kernels.py [--steps 23400] [--days 256]

Times the intraday day-block scan (the dominant cost of market simulation)
and the GARCH likelihood recursion (the dominant cost of rolling QMLE
refits), for every available backend, and a whole-market simulation under
each backend via ROUGHVOL_PURE_KERNELS.
"""

import argparse
import subprocess
import sys
import time

import numpy as np

from roughvol._kernels import available_backends


def time_call(fn, *args, repeat=5):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_scan(days, steps):
    rng = np.random.default_rng(0)
    z = rng.standard_normal((days, steps))
    ssd = np.full(days, 0.01 / np.sqrt(steps))
    rows = []
    for name, mod in available_backends().items():
        seconds = time_call(mod.scan_days, z, ssd, np.log(100.0), True)
        rate = days * steps / seconds / 1e6
        rows.append((f"scan_days ({days}x{steps})", name, seconds * 1e3, f"{rate:,.0f} Msteps/s"))
    return rows


def bench_garch(window=2000, evals=200):
    rng = np.random.default_rng(1)
    r2 = rng.standard_normal(window) ** 2 * 1e-4
    rows = []
    for name, mod in available_backends().items():
        t0 = time.perf_counter()
        for _ in range(evals):
            mod.garch_nll(r2, 1e-6, 0.08, 0.9, 1e-4)
        seconds = (time.perf_counter() - t0) / evals
        rows.append((f"garch_nll (T={window})", name, seconds * 1e3, f"{window / seconds / 1e6:,.0f} Mobs/s"))
    return rows


def bench_market(days, steps):
    """Full simulate_market run in a subprocess per backend (import-time switch)."""
    code = (
        "import time, numpy as np\n"
        "from roughvol.simulate import SimConfig, FouParams, simulate_market\n"
        "from roughvol._kernels import BACKEND\n"
        f"cfg = SimConfig(n_days={days}, steps_per_day={steps}, seed=0)\n"
        "params = FouParams(hurst=0.08, nu=0.3, alpha=5e-4, mean_level=-5.0)\n"
        "t0 = time.perf_counter()\n"
        "simulate_market(params, cfg)\n"
        "print(BACKEND, time.perf_counter() - t0)\n"
    )
    rows = []
    for env_value in ("0", "1"):
        out = subprocess.run(
            [sys.executable, "-c", code],
            capture_output=True, text=True,
            env={"ROUGHVOL_PURE_KERNELS": env_value, "PATH": "/usr/bin:/bin"},
        )
        if out.returncode != 0:
            print(out.stderr, file=sys.stderr)
            continue
        backend, seconds = out.stdout.split()[-2:]
        rows.append((f"simulate_market ({days}d x {steps})", backend, float(seconds) * 1e3, ""))
    return rows


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--days", type=int, default=256)
    parser.add_argument("--steps", type=int, default=23400)
    args = parser.parse_args()

    rows = bench_scan(args.days, args.steps) + bench_garch() + bench_market(args.days, args.steps)
    width = max(len(r[0]) for r in rows)
    print(f"{'benchmark':<{width}}  {'backend':<9} {'time':>10}  throughput")
    for name, backend, ms, rate in rows:
        print(f"{name:<{width}}  {backend:<9} {ms:>8.2f}ms  {rate}")
    by_bench = {}
    for name, backend, ms, _ in rows:
        by_bench.setdefault(name, {})[backend] = ms
    for name, timings in by_bench.items():
        if {"pure", "compiled"} <= set(timings):
            print(f"{name}: compiled is {timings['pure'] / timings['compiled']:.1f}x faster")


if __name__ == "__main__":
    main()
