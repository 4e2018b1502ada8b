"""Compare the compiled and pure-Python kernel backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from krylovlab import kernels


def _cases():
    rng = np.random.default_rng(0)
    n = 400
    diag = rng.standard_normal(n)
    off = rng.uniform(0.1, 1.0, n - 1)
    off_sq = off ** 2
    theta = np.linspace(0.0, 2 * np.pi, 2000, endpoint=False)
    px, py = 1.5 + 0.5 * np.cos(theta), 0.5 * np.sin(theta)
    h, nx = 0.01, 300
    grid = (0.5, -1.0, h, nx, 200)
    blocked = kernels.backends()["python"].disk_raster(px, py, 0.02, *grid)
    return {
        "sturm_count": lambda m: m.sturm_count(diag, off_sq, 0.1),
        "tridiag_eigvalsh": lambda m: m.tridiag_eigvalsh(diag, off),
        "disk_raster": lambda m: m.disk_raster(px, py, 0.02, *grid),
        "flood_outside": lambda m: m.flood_outside(blocked),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    mods = kernels.backends()
    names = list(mods)
    print(f"{'kernel':18s}" + "".join(f"{n:>14s}" for n in names) + ("     speedup" if len(names) > 1 else ""))
    for kname, fn in _cases().items():
        times = []
        for mod in mods.values():
            fn(mod)
            times.append(min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)))
        line = f"{kname:18s}" + "".join(f"{t * 1e3:11.3f} ms" for t in times)
        if len(times) > 1:
            line += f"{times[0] / times[1]:11.1f}x"
        print(line)


if __name__ == "__main__":
    main()
