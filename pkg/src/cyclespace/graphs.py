"""Simple undirected graphs as GF(2) edge vectors.

A graph on ``n`` labelled vertices is stored as a Python ``int`` whose bit
``edge_index(i, j, n)`` is set when the edge ``(i, j)`` is present.  Edge
indices follow the lexicographic order of pairs ``i < j``, so addition over
GF(2) is a plain XOR of the two integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Iterator

Edge = tuple[int, int]


class NotInCycleSpace(ValueError):
    """Raised when a graph has a vertex of odd degree."""


def num_pairs(n: int) -> int:
    return n * (n - 1) // 2


def edge_index(i: int, j: int, n: int) -> int:
    """Bit position of the pair ``(i, j)``, ``0 <= i < j < n``."""
    if not (0 <= i < j < n):
        raise ValueError(f"invalid pair ({i}, {j}) for n={n}")
    return i * n - i * (i + 1) // 2 + (j - i - 1)


@lru_cache(maxsize=None)
def pair_table(n: int) -> tuple[Edge, ...]:
    """All pairs in bit order."""
    return tuple((i, j) for i in range(n) for j in range(i + 1, n))


@lru_cache(maxsize=None)
def incidence_masks(n: int) -> tuple[int, ...]:
    """For each vertex, the mask of all pairs touching it."""
    masks = [0] * n
    for k, (i, j) in enumerate(pair_table(n)):
        masks[i] |= 1 << k
        masks[j] |= 1 << k
    return tuple(masks)


def _canon(e: Iterable[int]) -> Edge:
    i, j = map(int, e)
    if i == j:
        raise ValueError(f"self-loop ({i}, {j}) is not representable")
    return (i, j) if i < j else (j, i)


@dataclass(frozen=True)
class Graph:
    """A simple graph on ``n`` vertices with edge bit vector ``bits``."""

    n: int
    bits: int = 0

    def __post_init__(self):
        # numpy integers overflow on shifts past 63 bits
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "bits", int(self.bits))
        if self.n < 1:
            raise ValueError("a graph needs at least one vertex")
        if self.bits < 0 or self.bits >> num_pairs(self.n):
            raise ValueError("bit vector longer than n(n-1)/2")

    @classmethod
    def empty(cls, n: int) -> "Graph":
        return cls(n, 0)

    @classmethod
    def complete(cls, n: int) -> "Graph":
        return cls(n, (1 << num_pairs(n)) - 1)

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[Iterable[int]]) -> "Graph":
        bits = 0
        for e in edges:
            i, j = _canon(e)
            bits ^= 1 << edge_index(i, j, n)
        return cls(n, bits)

    def __xor__(self, other: "Graph") -> "Graph":
        return xor_add(self, other)

    def __len__(self) -> int:
        return self.bits.bit_count()

    def __iter__(self) -> Iterator[Edge]:
        return iter(self.edges())

    def __contains__(self, e) -> bool:
        return self.has_edge(*e)

    @property
    def num_edges(self) -> int:
        return self.bits.bit_count()

    def has_edge(self, i: int, j: int) -> bool:
        i, j = _canon((i, j))
        return bool(self.bits >> edge_index(i, j, self.n) & 1)

    def edges(self) -> list[Edge]:
        table = pair_table(self.n)
        out = []
        b = self.bits
        while b:
            low = b & -b
            out.append(table[low.bit_length() - 1])
            b ^= low
        return out

    def degrees(self) -> list[int]:
        return [(self.bits & m).bit_count() for m in incidence_masks(self.n)]

    def neighbors(self, v: int) -> list[int]:
        return [u for u in range(self.n) if u != v and self.has_edge(u, v)]

    def is_subgraph_of(self, other: "Graph") -> bool:
        return self.n == other.n and self.bits & ~other.bits == 0

    def to_adjacency(self):
        import numpy as np

        a = np.zeros((self.n, self.n), dtype=np.int64)
        for i, j in self.edges():
            a[i, j] = a[j, i] = 1
        return a

    @classmethod
    def from_adjacency(cls, a) -> "Graph":
        import numpy as np

        a = np.asarray(a)
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValueError("adjacency matrix must be square")
        if np.any(np.diag(a) != 0):
            raise ValueError("adjacency matrix has a nonzero diagonal")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency matrix is not symmetric")
        if not np.all((a == 0) | (a == 1)):
            raise ValueError("adjacency entries must be 0 or 1")
        return cls.from_edges(n, zip(*np.nonzero(np.triu(a, 1))))

    def bitstring(self) -> str:
        """0/1 string, lexicographic edge order, first pair first."""
        return "".join("1" if self.bits >> k & 1 else "0" for k in range(num_pairs(self.n)))

    @classmethod
    def from_bitstring(cls, n: int, s: str) -> "Graph":
        s = s.strip()
        if len(s) != num_pairs(n) or set(s) - {"0", "1"}:
            raise ValueError(f"expected {num_pairs(n)} binary digits")
        return cls(n, sum(1 << k for k, c in enumerate(s) if c == "1"))

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.edges()})"


def xor_add(g: Graph, h: Graph) -> Graph:
    """Symmetric difference of edge sets (addition in GF(2))."""
    if g.n != h.n:
        raise ValueError(f"vertex counts differ: {g.n} != {h.n}")
    return Graph(g.n, g.bits ^ h.bits)


def odd_vertices(g: Graph) -> list[int]:
    return [v for v, m in enumerate(incidence_masks(g.n)) if (g.bits & m).bit_count() & 1]


def is_cycle_space_member(g: Graph) -> bool:
    """True iff every vertex has even degree."""
    return all(not (g.bits & m).bit_count() & 1 for m in incidence_masks(g.n))


def project_to_cycle_space(g: Graph) -> tuple[Graph, int]:
    """Nearest cycle-space member by flipping edges between odd vertices.

    The odd-degree vertices ``v_1 < ... < v_k`` are paired as
    ``(v_i, v_{k/2+i})``; each pair's edge is flipped.  The returned distance
    ``k/2`` is the minimum number of edge flips needed.
    """
    odd = odd_vertices(g)
    half = len(odd) // 2
    flips = Graph.from_edges(g.n, ((odd[i], odd[half + i]) for i in range(half)))
    return g ^ flips, half


def cycle_space_cardinality(n: int) -> int:
    if n < 1:
        raise ValueError("n must be positive")
    return 2 ** ((n - 1) * (n - 2) // 2)


def is_connected(g: Graph) -> bool:
    if g.n == 1:
        return True
    seen = {0}
    stack = [0]
    adj = adjacency_lists(g)
    while stack:
        v = stack.pop()
        for u in adj[v]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return len(seen) == g.n


def adjacency_lists(g: Graph) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(g.n)]
    for i, j in g.edges():
        adj[i].append(j)
        adj[j].append(i)
    return adj
