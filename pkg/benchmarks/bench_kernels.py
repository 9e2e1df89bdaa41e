"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Prints one row per kernel with the best-of-``repeat`` time for each backend
and the speedup.  Both backends are checked to agree before timing.
"""

import argparse
import timeit

import numpy as np

from cyclespace import kernels
from cyclespace.graphs import Graph


def edge_arrays(g):
    e = g.edges()
    return np.array([u for u, _ in e], np.int64), np.array([v for _, v in e], np.int64)


def cases():
    rng = np.random.default_rng(0)
    m = 16
    probs = rng.random(40)
    masks = rng.integers(0, 1 << m, size=40)
    yield "xor_fold (40 cycles, 16 bits)", "xor_fold", (probs, masks, m)

    g = Graph.from_edges(8, [(i, (i + 1) % 8) for i in range(8)] + [(0, 4), (1, 5), (2, 6), (3, 7)])
    eu, ev = edge_arrays(g)
    yield "connected_spanning_flags (n=8, 12 edges)", "connected_spanning_flags", (8, eu, ev)
    flags = kernels.connected_spanning_flags(8, eu, ev)
    yield "subset_tree_counts (n=8, 12 edges)", "subset_tree_counts", (8, eu, ev, flags)

    n = 30
    A = rng.normal(size=(n, 3 * n))
    S = A @ A.T / (3 * n)
    cyc = Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)] + [(i, (i + 7) % n) for i in range(0, n, 3)])
    adj = cyc.to_adjacency().astype(bool)
    yield "covsel_fit (n=30, sparse)", "covsel_fit", (S, adj, 1e-10, 10_000)


def agree(a, b):
    if isinstance(a, tuple):
        return all(agree(x, y) for x, y in zip(a, b))
    if isinstance(a, (int, np.integer)):
        return a == b
    return np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float), atol=1e-8)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    backends = kernels.available_backends()
    names = sorted(backends)
    print(f"{'kernel':45s}" + "".join(f"{b:>12s}" for b in names) + ("     speedup" if len(names) > 1 else ""))
    for label, fn, params in cases():
        outs = {b: getattr(backends[b], fn)(*params) for b in names}
        if len(names) > 1 and not agree(outs["cython"], outs["python"]):
            raise SystemExit(f"{fn}: backends disagree")
        times = {}
        for b in names:
            f = getattr(backends[b], fn)
            t = timeit.Timer(lambda: f(*params))
            loops, _ = t.autorange()
            times[b] = min(t.repeat(args.repeat, loops)) / loops
        row = f"{label:45s}" + "".join(f"{times[b] * 1e3:10.3f}ms" for b in names)
        if len(names) > 1:
            row += f"{times['python'] / times['cython']:11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
