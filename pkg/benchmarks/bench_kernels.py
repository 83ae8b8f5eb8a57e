"""Compare the compiled and pure-numpy kernel paths.

Usage:
    python3 benchmarks/bench_kernels.py [--size NR NZ] [--repeat N]

The accelerated path is whatever :mod:`blowuplab._accel` selected at import
time; run once normally and once with BLOWUPLAB_DISABLE_NUMBA=1 to get both
columns, or pass --both to respawn the fallback in a subprocess.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np


def bench(repeat: int, nr: int, nz: int) -> dict:
    from blowuplab import kernels

    rng = np.random.default_rng(0)
    U = rng.normal(size=(nr, nz))
    r = np.linspace(0.0, 15.0, nr)
    lower = rng.normal(size=nr) * 0.1
    diag = 2.0 + np.abs(rng.normal(size=nr))
    upper = rng.normal(size=nr) * 0.1
    cp, denom = kernels.thomas_factor(lower, diag, upper)

    out = {"numba": kernels.NUMBA_ENABLED}

    def timeit(name, fn):
        fn()  # warm-up / compile
        t0 = time.perf_counter()
        for _ in range(repeat):
            fn()
        out[name] = (time.perf_counter() - t0) / repeat * 1e3

    timeit("grad_even [ms]", lambda: kernels.grad_even(U, 0.05, 0.05))
    timeit("lap_even_cyl [ms]", lambda: kernels.lap_even_cyl(U, r, 0.05, 0.05))
    timeit(
        "thomas_solve_many [ms]",
        lambda: kernels.thomas_solve_many(lower, cp, denom, U),
    )
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", nargs=2, type=int, default=(400, 600))
    ap.add_argument("--repeat", type=int, default=30)
    ap.add_argument("--both", action="store_true", help="also time the fallback")
    args = ap.parse_args()

    res = bench(args.repeat, *args.size)
    label = "numba" if res.pop("numba") else "numpy fallback"
    print(f"kernel timings ({label}, {args.size[0]}x{args.size[1]}):")
    for name, ms in res.items():
        print(f"  {name:24s} {ms:8.3f}")

    if args.both and "BLOWUPLAB_DISABLE_NUMBA" not in os.environ:
        env = dict(os.environ, BLOWUPLAB_DISABLE_NUMBA="1")
        subprocess.run(
            [sys.executable, __file__, "--size", *map(str, args.size),
             "--repeat", str(args.repeat)],
            env=env,
            check=True,
        )


if __name__ == "__main__":
    main()
