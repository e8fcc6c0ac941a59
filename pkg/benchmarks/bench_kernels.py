"""Time the assembly kernels under the numba and numpy backends.

Usage::

    python3 benchmarks/bench_kernels.py [--sizes 24 48 96] [--h 0.25] [--repeat 3]

Prints one row per (box, backend) with the best wall time of the element and
line kernels and checks that both backends return identical triplets.
"""
from __future__ import annotations

import argparse
import math
import time

import numpy as np

from conedelta import _kernels
from conedelta.discretize import build_grid, cell_kinds, line_quadrature
from conedelta.geometry import ConeModel


def _best(fn, repeat):
    best = math.inf
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=float, nargs="+", default=[24.0, 48.0, 96.0])
    ap.add_argument("--h", type=float, default=0.25)
    ap.add_argument("--theta-deg", type=float, default=45.0)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    model = ConeModel.from_degrees(1.0, args.theta_deg)
    if not _kernels.HAVE_NUMBA:
        print("numba unavailable; only the numpy path can be timed")
    backends = ["numba", "numpy"] if _kernels.HAVE_NUMBA else ["numpy"]
    # compile once outside the timings
    if _kernels.HAVE_NUMBA:
        g = build_grid(model, 4.0, 4.0, 0.5)
        _kernels.set_backend("numba")
        pts = np.array([[0.0, 0.0], [40.0 * math.sin(model.theta), 40.0 * math.cos(model.theta)]])
        kind = cell_kinds(g, pts)
        _kernels.element_coo(g.index, kind, g.r_nodes, g.h_r, g.h_z)
        _kernels.segment_coo(g.index, kind, *line_quadrature(g, pts))
    print(f"{'box':>6} {'unknowns':>9} {'backend':>8} {'element_s':>10} {'line_s':>9} {'identical':>9}")
    for box in args.sizes:
        grid = build_grid(model, box, box, args.h)
        far = 4.0 * box
        pts = np.array([[0.0, 0.0], [far * math.sin(model.theta), far * math.cos(model.theta)]])
        kind = cell_kinds(grid, pts)
        quad = line_quadrature(grid, pts)
        results = {}
        for b in backends:
            _kernels.set_backend(b)
            te, el = _best(lambda: _kernels.element_coo(grid.index, kind, grid.r_nodes, grid.h_r, grid.h_z),
                           args.repeat)
            tl, ln = _best(lambda: _kernels.segment_coo(grid.index, kind, *quad), args.repeat)
            results[b] = (te, tl, el, ln)
        ref = results[backends[0]]
        for b in backends:
            te, tl, el, ln = results[b]
            same = all(np.array_equal(x, y) for x, y in zip(el + ln, ref[2] + ref[3]))
            print(f"{box:6g} {grid.n_unknowns:9d} {b:>8} {te:10.4f} {tl:9.4f} {str(same):>9}")
    _kernels.set_backend("numba" if _kernels.HAVE_NUMBA else "numpy")


if __name__ == "__main__":
    main()
