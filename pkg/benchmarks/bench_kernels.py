"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--size 256] [--repeat 3]
"""

import argparse
import time

import numpy as np

from selfsup import kernels
from selfsup.denoise import disk_offsets


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=256)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    if kernels.compiled is None:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation` first")
    x = np.random.default_rng(0).random((args.size, args.size))
    backends = {"cython": kernels.compiled, "python": kernels.python}

    cases = []
    for r in (1, 3, 5):
        dr, dc = disk_offsets(r)
        cases.append((f"donut median r={r}", lambda b, dr=dr, dc=dc: b.disk_median(x, dr, dc, False, None)))
    for patch, window in ((3, 7), (5, 11)):
        pad = patch // 2 + window // 2
        padded = np.ascontiguousarray(np.pad(x, pad, mode="reflect"))
        cases.append((f"nl-means {patch}/{window}",
                      lambda b, p=padded, pa=patch, w=window: b.nl_means(p, args.size, args.size, 0.1, pa, w, None)))
    # one subset of a 4x4 grid partition, as used by masked calibration
    grid = np.zeros((args.size, args.size), dtype=np.uint8)
    grid[::4, ::4] = 1
    padded = np.ascontiguousarray(np.pad(x, 7, mode="reflect"))
    cases.append(("nl-means 5/11 1/16", lambda b: b.nl_means(padded, args.size, args.size, 0.1, 5, 11, grid)))

    print(f"image {args.size}x{args.size}, best of {args.repeat}")
    print(f"{'kernel':<20}{'cython [s]':>12}{'python [s]':>12}{'speedup':>10}{'max |diff|':>13}")
    for name, run in cases:
        tc, oc = best_of(lambda: run(backends["cython"]), args.repeat)
        tp, op = best_of(lambda: run(backends["python"]), args.repeat)
        print(f"{name:<20}{tc:>12.4f}{tp:>12.4f}{tp / tc:>10.1f}{np.abs(oc - op).max():>13.1e}")


if __name__ == "__main__":
    main()
