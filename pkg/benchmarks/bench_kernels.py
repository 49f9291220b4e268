"""Time the numba and numpy kernel paths on synthetic crowds.

    python3 benchmarks/bench_kernels.py --agents 20000 --repeat 20
"""
import argparse
import time

import numpy as np

from crowdforge import kernels


def make_paths(rng, n_agents, max_points):
    polys = []
    for _ in range(n_agents):
        k = int(rng.integers(2, max_points + 1))
        polys.append(np.cumsum(rng.uniform(-20, 20, (k, 2)), axis=0) + 200.0)
    points, cum, starts, counts = kernels.pack_polylines(polys)
    dist = rng.uniform(0, 1, n_agents) * cum[starts + counts - 1]
    return points, cum, starts, counts, dist


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--agents", type=int, default=20000)
    ap.add_argument("--max-points", type=int, default=12)
    ap.add_argument("--samples", type=int, default=200000, help="points per heat-map accumulation")
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if kernels.numba is None:
        raise SystemExit("numba is not installed; only the numpy path is available")

    rng = np.random.default_rng(args.seed)
    points, cum, starts, counts, dist = make_paths(rng, args.agents, args.max_points)
    xs = rng.uniform(0, 400, args.samples)
    ys = rng.uniform(0, 400, args.samples)

    # compile once and confirm both paths agree before timing
    a = kernels._positions_along_nb(points, cum, starts, counts, dist)
    b = kernels.positions_along_numpy(points, cum, starts, counts, dist)
    assert np.allclose(a, b), "positions differ between paths"
    ga, gb = np.zeros((200, 200), np.int64), np.zeros((200, 200), np.int64)
    kernels._accumulate_heatmap_nb(ga, xs, ys, 0.0, 0.0, 2.0)
    kernels.accumulate_heatmap_numpy(gb, xs, ys, 0.0, 0.0, 2.0)
    assert (ga == gb).all(), "heat-maps differ between paths"

    grid = np.zeros((200, 200), np.int64)
    rows = [
        ("positions_along", f"{args.agents} agents",
         best_of(lambda: kernels._positions_along_nb(points, cum, starts, counts, dist), args.repeat),
         best_of(lambda: kernels.positions_along_numpy(points, cum, starts, counts, dist), args.repeat)),
        ("accumulate_heatmap", f"{args.samples} points",
         best_of(lambda: kernels._accumulate_heatmap_nb(grid, xs, ys, 0.0, 0.0, 2.0), args.repeat),
         best_of(lambda: kernels.accumulate_heatmap_numpy(grid, xs, ys, 0.0, 0.0, 2.0), args.repeat)),
    ]
    print(f"{'kernel':<20} {'size':<16} {'numba ms':>10} {'numpy ms':>10} {'speedup':>8}")
    for name, size, tn, tp in rows:
        print(f"{name:<20} {size:<16} {tn * 1e3:>10.3f} {tp * 1e3:>10.3f} {tp / tn:>7.1f}x")


if __name__ == "__main__":
    main()
