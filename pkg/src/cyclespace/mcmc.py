"""Metropolis-Hastings over the cycle space.

Two prior modes:

``uniform-star``
    Uniform prior on the cycle space.  Each move XORs a uniformly chosen
    triangle into the current graph and is accepted on the marginal
    likelihood ratio alone.  Coordinates are kept over the star basis at
    vertex 0.
``tree``
    A spanning tree ``T ~ p(T)`` carries independent inclusion
    probabilities on its fundamental cycles.  Moves XOR a uniform basis cycle
    and include the prior ratio; every ``basis_period`` iterations ``T`` is
    redrawn by an independence move that keeps ``G`` fixed.
"""

from __future__ import annotations

import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .basis import (
    FundamentalCycleBasis,
    SpanningTree,
    decompose,
    fundamental_cycle_basis,
    random_spanning_tree,
    random_star_tree,
    reconstruct,
    star_tree,
)
from .graphs import Graph, edge_index, is_cycle_space_member, num_pairs
from .gwishart import Dataset, EstimatorError, GWishartParams, MarginalLikelihood
from .prior import CycleBasisPrior, log_mass_of_coords, sample_coords

log = logging.getLogger(__name__)

PRIOR_MODES = ("uniform-star", "tree")
TREE_PRIORS = ("uniform", "star")


@dataclass(frozen=True)
class McmcConfig:
    iterations: int = 50_000
    burn_in: int = 5_000
    basis_period: int = 100
    seed: int = 0
    prior_mode: str = "uniform-star"
    p: float | tuple = 0.5
    tree_prior: str = "uniform"
    estimator: str = "exact-laplace"
    thin: int = 10
    init: str = "prior"
    check_rate: float = 1e-3

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn-in must be non-negative and below the iteration count")
        if self.basis_period < 1 or self.thin < 1:
            raise ValueError("basis period and thinning must be at least 1")
        if self.prior_mode not in PRIOR_MODES:
            raise ValueError(f"prior mode must be one of {PRIOR_MODES}")
        if self.tree_prior not in TREE_PRIORS:
            raise ValueError(f"tree prior must be one of {TREE_PRIORS}")
        if self.init not in ("prior", "empty"):
            raise ValueError("init must be 'prior' or 'empty'")
        if not isinstance(self.p, (int, float)):
            object.__setattr__(self, "p", tuple(float(x) for x in self.p))

    def to_dict(self) -> dict:
        d = asdict(self)
        if isinstance(d["p"], tuple):
            d["p"] = list(d["p"])
        return d


@dataclass
class McmcState:
    G: Graph
    tree: SpanningTree
    basis: FundamentalCycleBasis
    coords: np.ndarray
    log_ml: float
    log_prior: float

    def check(self) -> None:
        """Assert that the coordinates still reconstruct ``G``."""
        if reconstruct(self.coords, self.basis) != self.G:
            raise AssertionError("coordinates out of sync with the graph")


@dataclass
class PosteriorSummary:
    n: int
    edge_prob: np.ndarray
    mean_edge_count: float
    samples_kept: int
    trace: np.ndarray = field(repr=False)
    acceptance_rate: float = float("nan")
    basis_acceptance_rate: float = float("nan")
    failures: int = 0
    runtime: float = 0.0
    state_counts: dict | None = field(default=None, repr=False)

    def median_graph(self) -> Graph:
        return self.threshold_graph(0.5)

    def threshold_graph(self, cutoff: float = 0.95) -> Graph:
        idx = np.argwhere(np.triu(self.edge_prob > cutoff, 1))
        return Graph.from_edges(self.n, [tuple(map(int, e)) for e in idx])


class ConstantLikelihood:
    """Flat likelihood; the chain then samples the prior."""

    estimator = "constant"

    def __call__(self, g: Graph) -> float:
        return 0.0

    def log_ratio(self, g: Graph, gp: Graph) -> float:
        return 0.0


def all_triangles(n: int) -> np.ndarray:
    """Edge-index triples of all triangles, shape (n choose 3, 3)."""
    tri = [(edge_index(a, b, n), edge_index(a, c, n), edge_index(b, c, n))
           for a, b, c in itertools.combinations(range(n), 3)]
    return np.array(tri, dtype=np.int64).reshape(-1, 3)


class Sampler:
    """One chain's fixed ingredients: config, likelihood and proposal tables."""

    def __init__(self, config: McmcConfig, n: int, likelihood):
        if n < 3:
            raise ValueError("the cycle space is trivial for n < 3")
        self.config = config
        self.n = n
        self.likelihood = likelihood
        self.r = (n - 1) * (n - 2) // 2
        self.triangles = all_triangles(n)
        self.tri_bits = [(1 << int(a)) | (1 << int(b)) | (1 << int(c)) for a, b, c in self.triangles]
        if config.prior_mode == "tree":
            self.probs = CycleBasisPrior(fundamental_cycle_basis(star_tree(n, 0)), config.p).probs
        else:
            self.probs = np.full(self.r, 0.5)
        self.accepted = 0
        self.proposed = 0
        self.basis_accepted = 0
        self.basis_proposed = 0
        self.failures = 0
        self._pos_basis = None
        self._pos = None

    def draw_tree(self, rng) -> SpanningTree:
        if self.config.prior_mode == "uniform-star":
            return star_tree(self.n, 0)
        if self.config.tree_prior == "star":
            return random_star_tree(self.n, rng)
        return random_spanning_tree(self.n, rng)

    def log_prior(self, coords) -> float:
        return log_mass_of_coords(coords, self.probs)

    def initial_state(self, rng) -> McmcState:
        tree = self.draw_tree(rng)
        basis = fundamental_cycle_basis(tree)
        if self.config.init == "empty":
            coords = np.zeros(self.r, dtype=bool)
        else:
            coords = sample_coords(CycleBasisPrior(basis, self.probs), rng)
        g = reconstruct(coords, basis)
        return McmcState(g, tree, basis, coords, self.likelihood(g), self.log_prior(coords))

    def propose(self, state: McmcState, rng) -> tuple[Graph, int]:
        """Proposed graph and the flipped basis index (-1 for a free triangle)."""
        if self.config.prior_mode == "uniform-star":
            t = int(rng.integers(len(self.tri_bits)))
            return Graph(self.n, state.G.bits ^ self.tri_bits[t]), -1
        i = int(rng.integers(self.r))
        return Graph(self.n, state.G.bits ^ state.basis.cycle_bits[i]), i

    def _flip_coords(self, state: McmcState, gp: Graph, i: int) -> np.ndarray:
        coords = state.coords.copy()
        if i >= 0:
            coords[i] = not coords[i]
            return coords
        basis = state.basis
        if self._pos_basis is not basis:
            self._pos = np.full(num_pairs(self.n), -1, dtype=np.int64)
            self._pos[basis.generator_bits] = np.arange(basis.size)
            self._pos_basis = basis
        changed = state.G.bits ^ gp.bits
        while changed:
            low = changed & -changed
            k = self._pos[low.bit_length() - 1]
            if k >= 0:
                coords[k] = not coords[k]
            changed ^= low
        return coords

    def log_alpha(self, state: McmcState, gp: Graph, i: int) -> tuple[float, float]:
        """Log acceptance ratio and the change in the log prior term."""
        lr = self.likelihood.log_ratio(state.G, gp)
        if i < 0:
            return lr, 0.0
        p = self.probs[i]
        on = math.log(p) if p > 0 else -math.inf
        off = math.log1p(-p) if p < 1 else -math.inf
        delta = off - on if state.coords[i] else on - off
        return lr + delta, delta

    def step(self, state: McmcState, rng) -> McmcState:
        gp, i = self.propose(state, rng)
        u = rng.random()
        self.proposed += 1
        try:
            la, dp = self.log_alpha(state, gp, i)
            if not (la >= 0 or u <= math.exp(la)):
                return state
            ml = self.likelihood(gp)
        except EstimatorError as err:
            self.failures += 1
            log.warning("mh_step: %s; state kept", err)
            return state
        self.accepted += 1
        coords = self._flip_coords(state, gp, i)
        return McmcState(gp, state.tree, state.basis, coords, ml, state.log_prior + dp)

    def change_basis(self, state: McmcState, rng) -> McmcState:
        tree = self.draw_tree(rng)
        basis = fundamental_cycle_basis(tree)
        coords = decompose(state.G, basis)
        lp = self.log_prior(coords)
        self.basis_proposed += 1
        la = lp - state.log_prior
        if la >= 0 or rng.random() <= math.exp(la):
            self.basis_accepted += 1
            return McmcState(state.G, tree, basis, coords, state.log_ml, lp)
        return state


def _likelihood_for(config: McmcConfig, data: Dataset | None, params: GWishartParams | None):
    if data is None:
        return ConstantLikelihood()
    if params is None:
        params = GWishartParams.default(data.n)
    return MarginalLikelihood(data, params, config.estimator, seed=config.seed)


def propose_cycle_flip(state: McmcState, sampler: Sampler, rng) -> Graph:
    return sampler.propose(state, rng)[0]


def mh_step(state: McmcState, sampler: Sampler, rng) -> McmcState:
    return sampler.step(state, rng)


def change_basis(state: McmcState, sampler: Sampler, rng) -> McmcState:
    return sampler.change_basis(state, rng)


def run_mcmc(config: McmcConfig, data: Dataset | None, params: GWishartParams | None = None,
             n: int | None = None, likelihood=None, seed_sequence=None,
             record_states: bool = False) -> PosteriorSummary:
    """Run one chain and summarise the retained samples.

    ``data=None`` runs with a flat likelihood (``n`` must then be given).
    ``likelihood`` overrides the marginal likelihood built from ``data``.
    ``record_states`` keeps a visit count per retained graph (keyed by bits).
    """
    if n is None:
        if data is None:
            raise ValueError("need n when no data is given")
        n = data.n
    if likelihood is None:
        likelihood = _likelihood_for(config, data, params)
    ss = seed_sequence if seed_sequence is not None else np.random.SeedSequence(config.seed)
    main_ss, check_ss = ss.spawn(2)
    rng = np.random.default_rng(main_ss)
    check_rng = np.random.default_rng(check_ss)
    start = time.perf_counter()
    sampler = Sampler(config, n, likelihood)
    state = sampler.initial_state(rng)

    E = num_pairs(n)
    counts = np.zeros(E, dtype=np.int64)
    trace = []
    edge_total = 0
    visits = {} if record_states else None
    for j in range(1, config.iterations + 1):
        if config.prior_mode == "tree" and j % config.basis_period == 0:
            state = sampler.change_basis(state, rng)
        else:
            state = sampler.step(state, rng)
        if check_rng.random() < config.check_rate:
            state.check()
        if j > config.burn_in and (j - config.burn_in) % config.thin == 0:
            if not is_cycle_space_member(state.G):
                raise AssertionError("chain left the cycle space")
            bits = state.G.bits
            if visits is not None:
                visits[bits] = visits.get(bits, 0) + 1
            while bits:
                low = bits & -bits
                counts[low.bit_length() - 1] += 1
                bits ^= low
            m = state.G.num_edges
            edge_total += m
            trace.append((j, state.log_ml, m))
    kept = len(trace)
    summary = _summary_from_counts(n, counts, kept, edge_total, np.array(trace, dtype=float).reshape(-1, 3))
    summary.acceptance_rate = sampler.accepted / sampler.proposed if sampler.proposed else float("nan")
    if sampler.basis_proposed:
        summary.basis_acceptance_rate = sampler.basis_accepted / sampler.basis_proposed
    summary.failures = sampler.failures
    summary.state_counts = visits
    summary.runtime = time.perf_counter() - start
    return summary


def _summary_from_counts(n, counts, kept, edge_total, trace) -> PosteriorSummary:
    if kept == 0:
        raise ValueError("no retained samples")
    prob = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    prob[iu] = counts / kept
    prob = prob + prob.T
    return PosteriorSummary(n, prob, edge_total / kept, kept, trace)


def _run_one(args):
    config, data, params, n, ss = args
    return run_mcmc(config, data, params, n=n, seed_sequence=ss)


def run_chains(config: McmcConfig, data: Dataset | None, params: GWishartParams | None = None,
               chains: int = 2, n: int | None = None, workers: int | None = None) -> PosteriorSummary:
    """Independent chains on spawned seed streams, merged by sample-weighted averaging."""
    if chains < 1:
        raise ValueError("need at least one chain")
    streams = np.random.SeedSequence(config.seed).spawn(chains)
    jobs = [(config, data, params, n, ss) for ss in streams]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(_run_one, jobs))
    else:
        parts = [_run_one(job) for job in jobs]
    return merge_summaries(parts)


def merge_summaries(parts: list[PosteriorSummary]) -> PosteriorSummary:
    w = np.array([p.samples_kept for p in parts], dtype=float)
    total = w.sum()
    out = PosteriorSummary(
        parts[0].n,
        sum(p.edge_prob * k for p, k in zip(parts, w)) / total,
        float(sum(p.mean_edge_count * k for p, k in zip(parts, w)) / total),
        int(total),
        np.vstack([p.trace for p in parts]),
    )
    out.acceptance_rate = float(np.mean([p.acceptance_rate for p in parts]))
    out.basis_acceptance_rate = float(np.mean([p.basis_acceptance_rate for p in parts]))
    out.failures = sum(p.failures for p in parts)
    out.runtime = sum(p.runtime for p in parts)
    return out


def cycle_space_members(n: int) -> list[Graph]:
    basis = fundamental_cycle_basis(star_tree(n, 0))
    r = basis.size
    out = []
    for s in range(1 << r):
        out.append(reconstruct(np.array([(s >> k) & 1 for k in range(r)], dtype=bool), basis))
    return out


@dataclass(frozen=True)
class ExactPosterior:
    members: tuple[Graph, ...]
    probs: np.ndarray

    def edge_prob(self) -> np.ndarray:
        n = self.members[0].n
        out = np.zeros((n, n))
        for g, p in zip(self.members, self.probs):
            for i, j in g.edges():
                out[i, j] += p
                out[j, i] += p
        return out

    def as_dict(self) -> dict[int, float]:
        return {g.bits: float(p) for g, p in zip(self.members, self.probs)}


def exact_posterior_small_n(n: int, data: Dataset | None, params: GWishartParams | None = None,
                            estimator: str = "exact-laplace", likelihood=None) -> ExactPosterior:
    """Posterior under the uniform prior by enumerating all cycle-space members (n <= 5)."""
    if not 1 <= n <= 5:
        raise ValueError("enumeration is limited to n <= 5")
    if likelihood is None:
        likelihood = _likelihood_for(McmcConfig(estimator=estimator, iterations=2, burn_in=0), data, params)
    members = cycle_space_members(n)
    lml = np.array([likelihood(g) for g in members])
    w = np.exp(lml - lml.max())
    return ExactPosterior(tuple(members), w / w.sum())


def posterior_summaries(samples, n: int | None = None) -> PosteriorSummary:
    """Summary of an explicit sequence of graphs."""
    samples = list(samples)
    if not samples:
        raise ValueError("no samples to summarise")
    n = samples[0].n if n is None else n
    counts = np.zeros(num_pairs(n), dtype=np.int64)
    for g in samples:
        for i, j in g.edges():
            counts[edge_index(i, j, n)] += 1
    trace = np.array([(k, np.nan, g.num_edges) for k, g in enumerate(samples)], dtype=float)
    return _summary_from_counts(n, counts, len(samples), sum(g.num_edges for g in samples), trace)
