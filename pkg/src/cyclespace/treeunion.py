"""Counting edge unions of spanning trees.

``Y(G, k)`` is the number of k-sets of distinct spanning trees of ``G`` whose
edge union is all of ``G``.  Every k-set of spanning trees of ``G`` has as
its union some connected spanning subgraph ``H``, so

    C(tau(G), k) = sum over connected spanning H <= G of Y(H, k),

and ``Y`` follows by Moebius inversion over edge subsets.  The module also
computes the quotient-graph count ``lambda(G, T0)`` and the bounds it gives on
``Y(G + T0, k + 1) / Y(G, k)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import kernels
from ._kernels_py import reduced_laplacian
from .basis import SpanningTree, random_spanning_tree
from .graphs import Edge, Graph, is_connected
from .prior import CapExceeded

UNION_EDGE_CAP = 20
MAX_PERMUTATION_K = 8


@dataclass(frozen=True)
class WeightedMultigraph:
    vertex_count: int
    edges: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        norm = []
        for u, v, w in self.edges:
            u, v, w = int(u), int(v), int(w)
            if not (0 <= u < self.vertex_count and 0 <= v < self.vertex_count):
                raise ValueError(f"edge ({u}, {v}) out of range")
            if w < 1:
                raise ValueError("edge weights must be positive integers")
            norm.append((u, v, w))
        object.__setattr__(self, "edges", tuple(norm))

    @classmethod
    def from_graph(cls, g: Graph) -> "WeightedMultigraph":
        return cls(g.n, tuple((i, j, 1) for i, j in g.edges()))

    def collapse(self) -> "WeightedMultigraph":
        """Drop self-loops and merge parallel edges into summed weights."""
        acc: dict[tuple[int, int], int] = {}
        for u, v, w in self.edges:
            if u != v:
                key = (min(u, v), max(u, v))
                acc[key] = acc.get(key, 0) + w
        return WeightedMultigraph(self.vertex_count, tuple((u, v, w) for (u, v), w in sorted(acc.items())))

    def quotient(self, label) -> "WeightedMultigraph":
        """Image under the vertex map ``label`` (values 0..c-1), collapsed."""
        label = list(label)
        c = max(label) + 1 if label else 0
        return WeightedMultigraph(c, tuple((label[u], label[v], w) for u, v, w in self.edges)).collapse()


def weighted_tree_enumerator(wg: WeightedMultigraph) -> int:
    """Sum over spanning trees of the product of edge weights (weighted Kirchhoff)."""
    wg = wg.collapse()
    if wg.vertex_count <= 1:
        return 1
    eu = [u for u, _, _ in wg.edges]
    ev = [v for _, v, _ in wg.edges]
    w = [x for _, _, x in wg.edges]
    return abs(kernels.bareiss_det(reduced_laplacian(wg.vertex_count, eu, ev, w)))


def count_spanning_trees(g) -> int:
    """Spanning-tree count of a Graph (or weighted count of a WeightedMultigraph); 0 if disconnected."""
    if isinstance(g, Graph):
        g = WeightedMultigraph.from_graph(g)
    return weighted_tree_enumerator(g)


def _components(n: int, edges) -> list[int]:
    root = list(range(n))

    def find(x):
        while root[x] != x:
            root[x] = root[root[x]]
            x = root[x]
        return x

    for u, v in edges:
        a, b = find(u), find(v)
        if a != b:
            root[a] = b
    reps: dict[int, int] = {}
    return [reps.setdefault(find(x), len(reps)) for x in range(n)]


def graph_union(g: Graph, t: SpanningTree | Graph) -> Graph:
    other = t.graph if isinstance(t, SpanningTree) else t
    if other.n != g.n:
        raise ValueError("vertex counts differ")
    return Graph(g.n, g.bits | other.bits)


def lambda_count(g: Graph, t0: SpanningTree) -> int:
    """Number of spanning trees ``T`` of the complete graph with ``G + T = G + T0``.

    Contract the components of the new edges ``E(G + T0) - E(G)``; the answer
    is the weighted tree enumerator of the quotient with parallel-edge counts
    as weights.
    """
    if t0.n != g.n:
        raise ValueError("vertex counts differ")
    new_edges = [e for e in t0.edges if not g.has_edge(*e)]
    label = _components(g.n, new_edges)
    return weighted_tree_enumerator(WeightedMultigraph.from_graph(g).quotient(label))


def count_trees_containing_edge(g: Graph, e: Edge) -> int:
    """Spanning trees of ``g`` through ``e``: weighted tree enumerator of ``g / e``."""
    i, j = min(e), max(e)
    if not g.has_edge(i, j):
        raise ValueError(f"edge {e} is not in the graph")
    label = _components(g.n, [(i, j)])
    return weighted_tree_enumerator(WeightedMultigraph.from_graph(g).quotient(label))


def _edge_arrays(g: Graph):
    edges = g.edges()
    return (np.array([u for u, _ in edges], dtype=np.int64),
            np.array([v for _, v in edges], dtype=np.int64))


def subset_tree_counts(g: Graph, cap: int = UNION_EDGE_CAP) -> list[int]:
    """Spanning-tree counts of every edge subset of ``g``, indexed by subset mask."""
    m = g.num_edges
    if m > cap:
        raise CapExceeded(f"{m} edges exceeds the cap of {cap}")
    eu, ev = _edge_arrays(g)
    flags = kernels.connected_spanning_flags(g.n, eu, ev)
    return kernels.subset_tree_counts(g.n, eu, ev, flags)


def count_union_representations(g: Graph, k: int, cap: int = UNION_EDGE_CAP) -> int:
    """``Y(G, k)``: k-sets of distinct spanning trees of ``g`` whose union is ``g``."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if not is_connected(g):
        return 0
    taus = subset_tree_counts(g, cap)
    m = g.num_edges
    full = (1 << m) - 1
    total = 0
    for s, t in enumerate(taus):
        if t >= k:
            c = math.comb(t, k)
            total += -c if (full ^ s).bit_count() & 1 else c
    return total


def union_representation_table(g: Graph, k: int, cap: int = UNION_EDGE_CAP) -> list[int]:
    """``Y(H, k)`` for every edge subset ``H`` of ``g`` by the memoised recursion.

    ``Y(H, k) = C(tau(H), k) - sum of Y over proper subsets``, evaluated bottom
    up over subset masks.  Costs ``3**m`` and is meant as a cross-check.
    """
    taus = subset_tree_counts(g, cap)
    y = [0] * len(taus)
    for s, t in enumerate(taus):
        if t < k:
            continue
        acc = math.comb(t, k)
        sub = (s - 1) & s
        while True:
            if sub != s:
                acc -= y[sub]
            if sub == 0:
                break
            sub = (sub - 1) & s
        y[s] = acc
    return y


@dataclass(frozen=True)
class RatioBounds:
    lower: int
    upper: Fraction
    exact: Fraction | None
    lower_valid: bool
    valid_permutations: int

    @property
    def holds(self) -> bool | None:
        if self.exact is None:
            return None
        return (not self.lower_valid or self.lower <= self.exact) and self.exact <= self.upper


def ratio_bounds(g: Graph, trees, t0: SpanningTree, cap: int = UNION_EDGE_CAP) -> RatioBounds:
    """Bounds on ``Y(G + T0, k + 1) / Y(G, k)`` with ``G`` the union of ``trees``.

    The lower bound ``lambda(G, T0)`` counts extensions of a representation of
    ``G`` by one more tree, which need not be new when ``T0`` lies inside
    ``G``; ``lower_valid`` is False then.  The upper bound divides
    ``min_e tau_e(G') * tau(K_n)**k`` by the best telescoping product of
    ``lambda(G_j, T_{j+1})`` over orderings of ``trees``.  Orderings where a
    tree adds no new edge give no valid bound and are skipped; if none remain
    the denominator is 1, which holds since ``Y(G, k) >= 1``.
    """
    trees = list(trees)
    k = len(trees)
    if not 1 <= k <= MAX_PERMUTATION_K:
        raise ValueError(f"need 1 <= k <= {MAX_PERMUTATION_K} trees")
    if len({t.edges for t in trees}) != k:
        raise ValueError("trees must be distinct")
    n = g.n
    union = 0
    for t in trees:
        if t.n != n:
            raise ValueError("tree and graph vertex counts differ")
        union |= t.graph.bits
    if union != g.bits:
        raise ValueError("graph is not the union of the given trees")
    gp = graph_union(g, t0)
    lower = lambda_count(g, t0)
    lower_valid = gp.bits != g.bits

    numer = min(count_trees_containing_edge(gp, e) for e in gp.edges()) * n ** ((n - 2) * k)
    best = 0
    valid = 0
    lam_cache: dict[tuple[int, tuple], int] = {}
    for sigma in itertools.permutations(range(k)):
        prod = 1
        cur = trees[sigma[0]].graph.bits
        ok = True
        for j in range(1, k):
            nxt = trees[sigma[j]]
            if nxt.graph.bits & ~cur == 0:
                ok = False
                break
            key = (cur, nxt.edges)
            if key not in lam_cache:
                lam_cache[key] = lambda_count(Graph(n, cur), nxt)
            prod *= lam_cache[key]
            cur |= nxt.graph.bits
        if ok:
            valid += 1
            best = max(best, prod)
    upper = Fraction(numer, best if valid else 1)

    exact = None
    if gp.num_edges <= cap:
        exact = Fraction(count_union_representations(gp, k + 1, cap), count_union_representations(g, k, cap))
    return RatioBounds(lower, upper, exact, lower_valid, valid)


def sample_distinct_trees(n: int, k: int, rng: np.random.Generator, max_tries: int = 10_000) -> list[SpanningTree]:
    out: list[SpanningTree] = []
    seen: set = set()
    for _ in range(max_tries):
        if len(out) == k:
            return out
        t = random_spanning_tree(n, rng)
        if t.edges not in seen:
            seen.add(t.edges)
            out.append(t)
    if len(out) == k:
        return out
    raise RuntimeError(f"could not draw {k} distinct spanning trees on {n} vertices")


@dataclass(frozen=True)
class BoundsRow:
    replicate: int
    edges_g: int
    edges_gp: int
    exact: Fraction | None
    lower: int
    upper: Fraction

    def log10(self) -> tuple[float | None, float, float]:
        ex = None if self.exact is None else math.log10(self.exact)
        return ex, math.log10(self.lower), math.log10(self.upper)


def sample_bounds_instance(n: int, k: int, rng: np.random.Generator, max_tries: int = 10_000):
    """``k`` distinct uniform trees and a uniform ``T0`` that adds at least one edge."""
    # the k trees must fit inside K_n minus an edge, which has (n-2) n^(n-3) trees
    if n < 3 or k > (n - 2) * n ** (n - 3):
        raise ValueError(f"no union of {k} distinct trees on {n} vertices misses an edge")
    for _ in range(max_tries):
        trees = sample_distinct_trees(n, k, rng)
        g = Graph(n, 0)
        for t in trees:
            g = graph_union(g, t)
        if g.num_edges == n * (n - 1) // 2:
            continue
        for _ in range(max_tries):
            t0 = random_spanning_tree(n, rng)
            if t0.graph.bits & ~g.bits:
                return g, trees, t0
    raise RuntimeError("could not sample a non-degenerate instance")


def bounds_experiment(n: int, k: int, replicates: int, rng: np.random.Generator,
                      cap: int = UNION_EDGE_CAP) -> list[BoundsRow]:
    """Random ``G`` (union of ``k`` uniform trees) and ``G' = G + T0`` with bounds and exact ratio."""
    rows = []
    for rep in range(replicates):
        g, trees, t0 = sample_bounds_instance(n, k, rng)
        b = ratio_bounds(g, trees, t0, cap)
        rows.append(BoundsRow(rep, g.num_edges, graph_union(g, t0).num_edges, b.exact, b.lower, b.upper))
    return rows


BOUNDS_HEADER = ("replicate", "edges_g", "edges_gp", "log10_exact", "log10_lower", "log10_upper")


def bounds_table(rows: list[BoundsRow]) -> list[tuple]:
    out = []
    for r in rows:
        ex, lo, up = r.log10()
        out.append((r.replicate, r.edges_g, r.edges_gp,
                     "" if ex is None else repr(ex), repr(lo), repr(up)))
    return out
