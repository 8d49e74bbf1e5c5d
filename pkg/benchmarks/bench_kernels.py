"""Compare the compiled and interpreted triangulation kernels.

Builds the same graded meshes with both kernels, checks that they agree node
for node, and reports wall-clock times.  Also times one assembly + eigensolve
so the mesher cost can be put in context.

    python benchmarks/bench_kernels.py [--repeat 3]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from robinspec.fem2d import assemble, lowest_eigs
from robinspec.geometry import polygon_by_name, truncated_sector
from robinspec.mesh import KERNEL_BACKEND, Grading, core, load_python_kernel, set_default_cache_dir, triangulate

CASES = [
    ("square(1), alpha=10", lambda: polygon_by_name("square(1)").region(), 0.1, Grading().for_alpha(10.0, corner_radius=0.3)),
    ("half-disk(1), alpha=20", lambda: polygon_by_name("half-disk(1)").region(), 0.1, Grading().for_alpha(20.0, corner_radius=0.15)),
    ("sector pi/4, r=15", lambda: truncated_sector(np.pi / 4, 15.0).region(), 1.875,
     Grading(corner_radius=2.0, layer_width=4.0, h_boundary=0.1, corner_rings=4, growth=0.25)),
]


def _time(fn, repeat: int):
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    set_default_cache_dir(None)  # time the kernels, not the cache
    compiled = core.kernel
    interpreted = load_python_kernel()
    print(f"default backend: {KERNEL_BACKEND}")
    print(f"{'case':28s} {'nodes':>8s} {'compiled s':>11s} {'python s':>10s} {'speedup':>8s} {'same':>5s} {'solve s':>8s}")
    for label, make, h, grading in CASES:
        region = make()
        try:
            core.kernel = compiled
            tc, mc = _time(lambda: triangulate(region, h, grading, cache_dir=None), args.repeat)
            core.kernel = interpreted
            tp, mp = _time(lambda: triangulate(region, h, grading, cache_dir=None), 1)
        finally:
            core.kernel = compiled
        same = (mc.nodes.shape == mp.nodes.shape and np.array_equal(mc.triangles, mp.triangles)
                and np.allclose(mc.nodes, mp.nodes, rtol=0.0, atol=1e-12))
        alpha = 10.0 if "square" in label else 20.0 if "disk" in label else 1.0
        ts, _ = _time(lambda: lowest_eigs(assemble(mc), alpha, 4, return_vectors=False), 1)
        print(f"{label:28s} {mc.n_nodes:8d} {tc:11.3f} {tp:10.3f} {tp / tc:8.1f} {str(same):>5s} {ts:8.3f}")


if __name__ == "__main__":
    main()
