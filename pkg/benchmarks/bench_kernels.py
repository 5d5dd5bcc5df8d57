"""Time the pointwise kernels under the numba and numpy backends.

    python benchmarks/bench_kernels.py [--size N] [--repeat R]

Each kernel is run once per backend to warm up (JIT compile), then timed as
the best of ``repeat`` runs. Outputs are compared to confirm equivalence.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from charmonic import _accel


def _inputs(size: int, rng: np.random.Generator) -> dict:
    npts = size**4
    m = rng.normal(size=(npts, 4, 4)) * 0.1
    spd = np.eye(4) + 0.5 * (m + m.transpose(0, 2, 1))
    field = rng.normal(size=(4, size, size, size, size))
    x = rng.normal(size=(3, npts))
    x /= np.linalg.norm(x, axis=0)
    dphi = rng.normal(size=(4, 3, npts))
    ginv = np.ascontiguousarray(np.moveaxis(np.linalg.inv(spd), 0, -1))
    return {"spd": spd, "field": field, "x": x, "dphi": dphi, "ginv": ginv}


def _cases(d: dict, size: int) -> dict:
    h = 2 * np.pi / size
    return {
        "spd_factor": lambda: _accel.spd_factor(d["spd"])[1],
        "fd4_derivative": lambda: _accel.fd4_derivative(d["field"], 2, h),
        "sphere_se": lambda: _accel.sphere_se(d["x"], d["dphi"], d["ginv"]),
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=16, help="points per axis of the 4D grid")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    data = _inputs(args.size, np.random.Generator(np.random.Philox(0)))
    cases = _cases(data, args.size)
    if not _accel.HAVE_NUMBA:
        print("numba unavailable; only the numpy backend can be timed")
    backends = ["numpy"] + (["numba"] if _accel.HAVE_NUMBA else [])
    previous = _accel.get_backend()
    print(f"grid {args.size}^4 = {args.size**4} points, best of {args.repeat}")
    print(f"{'kernel':16s} " + " ".join(f"{b:>12s}" for b in backends) + f" {'speedup':>9s} {'max diff':>10s}")
    try:
        for name, fn in cases.items():
            times, outs = {}, {}
            for b in backends:
                _accel.set_backend(b)
                outs[b] = fn()
                times[b] = min(timeit.repeat(fn, number=1, repeat=args.repeat))
            diff = float(np.max(np.abs(outs["numba"] - outs["numpy"]))) if len(backends) == 2 else float("nan")
            speed = times["numpy"] / times["numba"] if len(backends) == 2 else float("nan")
            print(f"{name:16s} " + " ".join(f"{times[b] * 1e3:10.2f}ms" for b in backends) + f" {speed:8.2f}x {diff:10.2e}")
    finally:
        _accel.set_backend(previous)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
