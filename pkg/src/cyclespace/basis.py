"""Spanning trees of the complete graph and their fundamental cycle bases."""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .graphs import Edge, Graph, NotInCycleSpace, edge_index, pair_table


@dataclass(frozen=True)
class SpanningTree:
    n: int
    edges: tuple[Edge, ...]

    def __post_init__(self):
        edges = tuple(sorted((min(e), max(e)) for e in self.edges))
        object.__setattr__(self, "edges", edges)
        if self.n < 1:
            raise ValueError("n must be positive")
        if len(edges) != self.n - 1 or len(set(edges)) != len(edges):
            raise ValueError(f"a spanning tree on {self.n} vertices has {self.n - 1} distinct edges")
        for i, j in edges:
            if not (0 <= i < j < self.n):
                raise ValueError(f"edge ({i}, {j}) out of range")
        if not _connected(self.n, edges):
            raise ValueError("edges do not form a spanning tree")

    @cached_property
    def graph(self) -> Graph:
        return Graph.from_edges(self.n, self.edges)

    @cached_property
    def parents(self) -> tuple[list[int], list[int]]:
        """Parent and depth arrays for the tree rooted at vertex 0."""
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        parent = [-1] * self.n
        depth = [0] * self.n
        stack = [0]
        seen = [False] * self.n
        seen[0] = True
        while stack:
            v = stack.pop()
            for u in adj[v]:
                if not seen[u]:
                    seen[u] = True
                    parent[u] = v
                    depth[u] = depth[v] + 1
                    stack.append(u)
        return parent, depth

    def star_root(self) -> int | None:
        """The root if this is a star tree, else ``None``."""
        if self.n <= 2:
            return 0
        deg = [0] * self.n
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        hub = max(range(self.n), key=deg.__getitem__)
        return hub if deg[hub] == self.n - 1 else None

    def path(self, a: int, b: int) -> list[Edge]:
        """Edges on the unique tree path between ``a`` and ``b``."""
        parent, depth = self.parents
        left, right = [], []
        while depth[a] > depth[b]:
            left.append((a, parent[a]))
            a = parent[a]
        while depth[b] > depth[a]:
            right.append((b, parent[b]))
            b = parent[b]
        while a != b:
            left.append((a, parent[a]))
            right.append((b, parent[b]))
            a, b = parent[a], parent[b]
        return left + right[::-1]


def _connected(n: int, edges) -> bool:
    root = list(range(n))

    def find(x):
        while root[x] != x:
            root[x] = root[root[x]]
            x = root[x]
        return x

    comps = n
    for i, j in edges:
        a, b = find(i), find(j)
        if a != b:
            root[a] = b
            comps -= 1
    return comps == 1


def star_tree(n: int, root: int = 0) -> SpanningTree:
    if n < 2:
        raise ValueError("a star tree needs n >= 2")
    if not 0 <= root < n:
        raise ValueError(f"root {root} out of range for n={n}")
    return SpanningTree(n, tuple((root, v) for v in range(n) if v != root))


def prufer_decode(seq, n: int) -> SpanningTree:
    """The labelled tree encoded by a Prüfer sequence of length ``n - 2``."""
    degree = [1] * n
    for v in seq:
        degree[v] += 1
    leaves = [v for v in range(n) if degree[v] == 1]
    heapq.heapify(leaves)
    edges = []
    for v in seq:
        leaf = heapq.heappop(leaves)
        edges.append((leaf, v))
        degree[v] -= 1
        if degree[v] == 1:
            heapq.heappush(leaves, v)
    u, w = heapq.heappop(leaves), heapq.heappop(leaves)
    edges.append((u, w))
    return SpanningTree(n, tuple(edges))


def random_spanning_tree(n: int, rng: np.random.Generator) -> SpanningTree:
    """Uniform spanning tree of the complete graph via a uniform Prüfer sequence."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if n == 2:
        return SpanningTree(2, ((0, 1),))
    return prufer_decode(rng.integers(0, n, size=n - 2).tolist(), n)


def random_star_tree(n: int, rng: np.random.Generator) -> SpanningTree:
    return star_tree(n, int(rng.integers(n)))


@dataclass(frozen=True)
class FundamentalCycleBasis:
    """Fundamental cycles of ``tree``, ordered by their generating non-tree edge."""

    tree: SpanningTree
    cycles: tuple[Graph, ...]
    generator_edges: tuple[Edge, ...]
    _position: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        pos = {e: k for k, e in enumerate(self.generator_edges)}
        object.__setattr__(self, "_position", pos)

    @property
    def n(self) -> int:
        return self.tree.n

    @property
    def size(self) -> int:
        return len(self.cycles)

    def __len__(self) -> int:
        return len(self.cycles)

    def index_of(self, edge: Edge) -> int:
        """Position of the cycle generated by the non-tree ``edge``."""
        return self._position[(min(edge), max(edge))]

    @cached_property
    def generator_bits(self) -> np.ndarray:
        n = self.n
        return np.array([edge_index(i, j, n) for i, j in self.generator_edges], dtype=np.int64)

    @cached_property
    def cycle_bits(self) -> list[int]:
        return [c.bits for c in self.cycles]


def fundamental_cycle_basis(tree: SpanningTree) -> FundamentalCycleBasis:
    tree_set = set(tree.edges)
    gens = tuple(e for e in pair_table(tree.n) if e not in tree_set)
    cycles = tuple(Graph.from_edges(tree.n, [(a, b)] + tree.path(a, b)) for a, b in gens)
    return FundamentalCycleBasis(tree, cycles, gens)


def decompose(g: Graph, basis: FundamentalCycleBasis) -> np.ndarray:
    """Coordinates of ``g`` over ``basis`` as a boolean vector.

    Coordinate ``i`` is set iff the generating edge of cycle ``i`` is in ``g``.
    Raises :class:`NotInCycleSpace` if the selected cycles do not sum to ``g``.
    """
    if g.n != basis.n:
        raise ValueError(f"graph has {g.n} vertices, basis has {basis.n}")
    bits = g.bits
    coords = np.array([bool(bits >> int(k) & 1) for k in basis.generator_bits], dtype=bool)
    if _xor_selected(coords, basis.cycle_bits) != bits:
        raise NotInCycleSpace("graph has odd-degree vertices")
    return coords


def reconstruct(coords, basis: FundamentalCycleBasis) -> Graph:
    coords = np.asarray(coords, dtype=bool)
    if coords.shape != (basis.size,):
        raise ValueError(f"expected {basis.size} coordinates, got {coords.shape}")
    return Graph(basis.n, _xor_selected(coords, basis.cycle_bits))


def _xor_selected(coords, cycle_bits) -> int:
    acc = 0
    for k in np.flatnonzero(coords):
        acc ^= cycle_bits[k]
    return acc
