"""Priors on the cycle space from independent cycle-basis inclusions.

A :class:`CycleBasisPrior` includes basis cycle ``i`` with probability
``probs[i]``, independently, and returns the XOR of the included cycles.
The functions below compute its edge marginals, the joint law of the edges
at one vertex, the star-basis degree distribution and edge-count bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from . import kernels
from .basis import FundamentalCycleBasis, decompose, fundamental_cycle_basis, star_tree
from .graphs import Edge, Graph, NotInCycleSpace, edge_index

DIRECT_CONVOLUTION_MAX_R = 64
JOINT_CAP_BITS = 24


class CapExceeded(RuntimeError):
    """An exact enumeration would exceed its configured size cap."""


@dataclass(frozen=True)
class CycleBasisPrior:
    basis: FundamentalCycleBasis
    probs: np.ndarray

    def __post_init__(self):
        probs = np.array(self.probs, dtype=float)
        if probs.ndim == 0:
            probs = np.full(self.basis.size, float(probs))
        elif probs.shape != (self.basis.size,):
            raise ValueError(f"need {self.basis.size} probabilities, got shape {probs.shape}")
        if np.any((probs < 0) | (probs > 1)) or not np.all(np.isfinite(probs)):
            raise ValueError("inclusion probabilities must lie in [0, 1]")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, basis: FundamentalCycleBasis, p: float = 0.5) -> "CycleBasisPrior":
        return cls(basis, np.full(basis.size, float(p)))

    @classmethod
    def star(cls, n: int, p=0.5, root: int = 0) -> "CycleBasisPrior":
        basis = fundamental_cycle_basis(star_tree(n, root))
        return cls(basis, p)

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def r(self) -> int:
        return self.basis.size


def sample_coords(prior: CycleBasisPrior, rng: np.random.Generator) -> np.ndarray:
    return rng.random(prior.r) < prior.probs


def sample_graph(prior: CycleBasisPrior, rng: np.random.Generator) -> Graph:
    bits = 0
    cycle_bits = prior.basis.cycle_bits
    for k in np.flatnonzero(sample_coords(prior, rng)):
        bits ^= cycle_bits[k]
    return Graph(prior.n, bits)


def log_prior_mass(g: Graph, prior: CycleBasisPrior) -> float:
    """``log p(G | T)``; ``-inf`` when ``g`` is outside the cycle space."""
    try:
        x = decompose(g, prior.basis)
    except NotInCycleSpace:
        return -math.inf
    return log_mass_of_coords(x, prior.probs)


def log_mass_of_coords(x, probs) -> float:
    p = np.asarray(probs)
    with np.errstate(divide="ignore"):
        terms = np.where(x, np.log(p), np.log1p(-p))
    return float(terms.sum())


def covering_cycles(basis: FundamentalCycleBasis, e: Edge) -> np.ndarray:
    """Indices of the basis cycles that contain edge ``e``."""
    i, j = min(e), max(e)
    k = edge_index(i, j, basis.n)
    return np.array([c for c, bits in enumerate(basis.cycle_bits) if bits >> k & 1], dtype=np.int64)


def odd_coefficient_mass(p) -> float:
    """Sum of the odd-power coefficients of ``prod_i (1 - p_i + p_i x)``."""
    p = np.asarray(p, dtype=float)
    if p.size == 0:
        return 0.0
    coeffs = np.array([1.0])
    if p.size <= DIRECT_CONVOLUTION_MAX_R:
        for pi in p:
            coeffs = np.convolve(coeffs, [1.0 - pi, pi])
    else:
        polys = [np.array([1.0 - pi, pi]) for pi in p]
        while len(polys) > 1:
            polys = [fftconvolve(a, b) if b is not None else a
                     for a, b in zip(polys[::2], polys[1::2] + [None])]
        coeffs = polys[0]
    return float(coeffs[1::2].sum())


def odd_parity_closed_form(p) -> float:
    """``(1 - prod(1 - 2 p_i)) / 2``, the probability of an odd number of successes."""
    p = np.asarray(p, dtype=float)
    if p.size == 0:
        return 0.0
    return float((1.0 - np.prod(1.0 - 2.0 * p)) / 2.0)


def edge_inclusion_probability(prior: CycleBasisPrior, e: Edge) -> float:
    i, j = e
    if i == j or not (0 <= i < prior.n and 0 <= j < prior.n):
        raise ValueError(f"invalid edge {e} for n={prior.n}")
    return odd_coefficient_mass(prior.probs[covering_cycles(prior.basis, e)])


def edge_inclusion_matrix(prior: CycleBasisPrior) -> np.ndarray:
    n = prior.n
    out = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            out[i, j] = out[j, i] = edge_inclusion_probability(prior, (i, j))
    return out


@dataclass(frozen=True)
class JointEdgeDistribution:
    """Joint inclusion law of the covered edges at a vertex.

    ``probs[s]`` is the probability that exactly the edges ``edges[b]`` with
    bit ``b`` of ``s`` set are present among ``edges``.  Incident edges that
    no basis cycle covers are never present and are left out.
    """

    vertex: int
    edges: tuple[Edge, ...]
    probs: np.ndarray

    @property
    def m(self) -> int:
        return len(self.edges)

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {
            tuple((s >> b) & 1 for b in range(self.m)): float(p)
            for s, p in enumerate(self.probs)
        }

    def edge_marginal(self, b: int) -> float:
        s = np.arange(self.probs.size)
        return float(self.probs[(s >> b) & 1 == 1].sum())

    def degree_distribution(self) -> np.ndarray:
        """Probability of each degree ``0..m`` (sum by popcount)."""
        pop = np.array([s.bit_count() for s in range(self.probs.size)])
        return np.bincount(pop, weights=self.probs, minlength=self.m + 1)


def _vertex_masks(prior: CycleBasisPrior, v: int):
    n = prior.n
    incident = [(min(v, u), max(v, u)) for u in range(n) if u != v]
    cyc_bits = prior.basis.cycle_bits
    through = []
    for c, bits in enumerate(cyc_bits):
        hit = [e for e in incident if bits >> edge_index(e[0], e[1], n) & 1]
        if hit:
            through.append((c, hit))
    covered = sorted({e for _, hit in through for e in hit})
    pos = {e: b for b, e in enumerate(covered)}
    masks = []
    probs = []
    for c, hit in through:
        mask = 0
        for e in hit:
            mask |= 1 << pos[e]
        masks.append(mask)
        probs.append(prior.probs[c])
    return tuple(covered), np.array(probs, dtype=float), np.array(masks, dtype=np.int64)


def vertex_joint_edge_distribution(
    prior: CycleBasisPrior, v: int, cap: int = JOINT_CAP_BITS, method: str = "fold"
) -> JointEdgeDistribution:
    """Exact joint distribution of the edges at ``v``.

    Each cycle through ``v`` touches two of its edges, so including it XORs a
    two-bit mask into the pattern.  ``method="fold"`` applies the cycles one at
    a time; ``method="wht"`` multiplies their Walsh-Hadamard transforms.
    """
    if not 0 <= v < prior.n:
        raise ValueError(f"vertex {v} out of range")
    edges, probs, masks = _vertex_masks(prior, v)
    m = len(edges)
    if m > cap:
        raise CapExceeded(f"vertex {v} has {m} covered edges; 2**{m} exceeds the 2**{cap} cap")
    if method == "fold":
        dist = kernels.xor_fold(probs, masks, m)
    elif method == "wht":
        dist = _wht_product(probs, masks, m)
    else:
        raise ValueError(f"unknown method {method!r}")
    return JointEdgeDistribution(v, edges, dist)


def walsh_hadamard(a: np.ndarray) -> np.ndarray:
    """Unnormalised fast Walsh-Hadamard transform along a length ``2**m`` axis."""
    a = np.array(a, dtype=float)
    h = 1
    size = a.size
    while h < size:
        a = a.reshape(-1, 2, h)
        a = np.stack((a[:, 0] + a[:, 1], a[:, 0] - a[:, 1]), axis=1).reshape(size)
        h *= 2
    return a


def _wht_product(probs, masks, m) -> np.ndarray:
    size = 1 << m
    s = np.arange(size)
    spec = np.ones(size)
    for p, mask in zip(probs, masks):
        parity = np.array([(int(mask) & int(x)).bit_count() & 1 for x in s])
        spec *= (1.0 - p) + p * (1.0 - 2.0 * parity)
    return walsh_hadamard(spec) / size


def star_degree_pmf(n: int, p: float, k: int) -> float:
    """Degree law of a non-root vertex under a star basis with common probability ``p``."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    if k == 0:
        return (1.0 - p) ** (n - 2)
    if k % 2 or k < 2 or k >= n:
        return 0.0
    return sum(math.comb(n - 2, j) * p**j * (1.0 - p) ** (n - 2 - j) for j in (k - 1, k))


def edge_count_bounds(n: int, r: int) -> tuple[int, int]:
    """Bounds on ``|E|`` when ``r`` star-basis cycles are included."""
    if not 0 <= r <= (n - 1) * (n - 2) // 2:
        raise ValueError(f"r={r} out of range for n={n}")
    m = (n - 1) // 2
    return r, r + 2 * min(r, m)


def star_cycles_graph(n: int, pairs, root: int = 0) -> Graph:
    """XOR of the star-basis triangles ``{root, a, b}`` for the given pairs."""
    bits = 0
    for a, b in pairs:
        bits ^= Graph.from_edges(n, [(root, a), (root, b), (a, b)]).bits
    return Graph(n, bits)


def max_edge_construction(n: int, r: int, root: int = 0) -> Graph:
    """``r <= (n-1)//2`` vertex-disjoint star triangles, which have ``3r`` edges."""
    m = (n - 1) // 2
    if r > m:
        raise ValueError(f"disjoint construction needs r <= {m}")
    others = [v for v in range(n) if v != root]
    return star_cycles_graph(n, [(others[2 * t], others[2 * t + 1]) for t in range(r)], root)


def partial_fisher_yates(size: int, r: int, rng: np.random.Generator) -> list[int]:
    """``r`` distinct indices from ``range(size)``, uniformly without replacement."""
    idx = list(range(size))
    for t in range(r):
        s = int(rng.integers(t, size))
        idx[t], idx[s] = idx[s], idx[t]
    return idx[:r]


def edge_count_experiment(n: int, r: int, draws: int, rng: np.random.Generator) -> np.ndarray:
    """Edge counts of graphs built from ``r`` distinct random star-basis cycles."""
    basis = fundamental_cycle_basis(star_tree(n, 0))
    cyc = basis.cycle_bits
    out = np.empty(draws, dtype=np.int64)
    for d in range(draws):
        bits = 0
        for k in partial_fisher_yates(basis.size, r, rng):
            bits ^= cyc[k]
        out[d] = bits.bit_count()
    return out
