"""G-Wishart normalising constants and Gaussian graphical model marginal likelihoods.

For a graph ``G`` the constant is

    I_G(delta, D) = integral over positive definite K with K_ij = 0 off G
                    of |K|^{(delta-2)/2} exp(-tr(K D)/2) dK,

with Lebesgue measure on the diagonal and the upper-triangular edge entries.
It is exact for decomposable graphs (clique/separator factorisation) and is
approximated otherwise by a Laplace expansion around the constrained mode or
by importance sampling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gammaln

from . import kernels
from .graphs import Graph, adjacency_lists

LOG_2PI = math.log(2.0 * math.pi)
SYMMETRY_TOL = 1e-10
MODE_TOL = 1e-9
MAX_SWEEPS = 10_000
ESTIMATORS = ("exact-laplace", "laplace", "oracle")


class NotDecomposable(ValueError):
    pass


class EstimatorError(RuntimeError):
    """A normalising-constant evaluation failed; ``term`` names which one."""

    def __init__(self, message: str, term: str | None = None, graph: Graph | None = None):
        super().__init__(message if term is None else f"{term} term: {message}")
        self.term = term
        self.graph = graph


class ModeFailure(EstimatorError):
    pass


def _check_spd(D, name="D") -> np.ndarray:
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError(f"{name} must be a square matrix")
    if not np.allclose(D, D.T, rtol=0.0, atol=SYMMETRY_TOL):
        raise ValueError(f"{name} is not symmetric")
    try:
        np.linalg.cholesky(D)
    except np.linalg.LinAlgError:
        raise ValueError(f"{name} is not positive definite") from None
    return 0.5 * (D + D.T)


@dataclass(frozen=True)
class GWishartParams:
    delta: float
    D: np.ndarray

    def __post_init__(self):
        if not self.delta > 2:
            raise ValueError(f"degrees of freedom must exceed 2, got {self.delta}")
        object.__setattr__(self, "D", _check_spd(self.D))

    @classmethod
    def default(cls, n: int, delta: float = 3.0) -> "GWishartParams":
        return cls(delta, np.eye(n))

    @property
    def n(self) -> int:
        return self.D.shape[0]


@dataclass(frozen=True)
class Dataset:
    N: int
    U: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        if U.ndim != 2 or U.shape[0] != U.shape[1]:
            raise ValueError("scatter matrix must be square")
        if not np.allclose(U, U.T, rtol=0.0, atol=1e-8 * max(1.0, np.abs(U).max(initial=0.0))):
            raise ValueError("scatter matrix is not symmetric")
        if self.N < 0:
            raise ValueError("N must be non-negative")
        object.__setattr__(self, "U", 0.5 * (U + U.T))

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @classmethod
    def from_matrix(cls, X, center: bool = True, standardize: bool = False) -> "Dataset":
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] < 1:
            raise ValueError("data matrix needs at least one row")
        if center or standardize:
            X = X - X.mean(axis=0)
        if standardize:
            sd = X.std(axis=0)
            X = X / np.where(sd > 0, sd, 1.0)
        return cls(X.shape[0], X.T @ X)

    @classmethod
    def empty(cls, n: int) -> "Dataset":
        return cls(0, np.zeros((n, n)))


def log_multigamma(n: int, a: float) -> float:
    """log of the multivariate gamma function Gamma_n(a)."""
    if n < 0:
        raise ValueError("dimension must be non-negative")
    if n and not a > (n - 1) / 2:
        raise ValueError(f"need a > (n-1)/2, got a={a}, n={n}")
    j = np.arange(1, n + 1)
    return float(n * (n - 1) / 4 * math.log(math.pi) + gammaln(a + (1 - j) / 2).sum())


def log_I_complete(delta: float, D) -> float:
    """Log normalising constant of the Wishart law on the complete graph."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    n = D.shape[0]
    if n == 0:
        return 0.0
    sign, logdet = np.linalg.slogdet(D)
    if sign <= 0:
        raise ValueError("D is not positive definite")
    a = (delta + n - 1) / 2
    return float(a * n * math.log(2.0) - a * logdet + log_multigamma(n, a))


@dataclass(frozen=True)
class JunctionStructure:
    cliques: tuple[tuple[int, ...], ...]
    separators: tuple[tuple[int, ...], ...]


def max_cardinality_order(adj: list[list[int]]) -> list[int]:
    n = len(adj)
    weight = [0] * n
    done = [False] * n
    order = []
    for _ in range(n):
        v = max((u for u in range(n) if not done[u]), key=lambda u: (weight[u], -u))
        done[v] = True
        order.append(v)
        for u in adj[v]:
            if not done[u]:
                weight[u] += 1
    return order


def decomposable_structure(g: Graph) -> JunctionStructure | None:
    """Cliques and separators of a junction tree, or ``None`` if ``g`` is not chordal.

    Maximum cardinality search gives an ordering whose reverse is a perfect
    elimination ordering exactly when the graph is chordal.
    """
    adj = adjacency_lists(g)
    order = max_cardinality_order(adj)
    pos = {v: k for k, v in enumerate(order)}
    nbr = [set(a) for a in adj]
    pred = [{u for u in nbr[v] if pos[u] < pos[v]} for v in order]
    for k, v in enumerate(order):
        if len(pred[k]) > 1:
            last = max(pred[k], key=pos.__getitem__)
            if not pred[k] - {last} <= pred[pos[last]]:
                return None
    candidates = [frozenset(pred[k] | {v}) for k, v in enumerate(order)]
    cliques = [c for k, c in enumerate(candidates)
               if not any(c < d for d in candidates[k + 1:])]
    seen: set[int] = set()
    seps = []
    for c in cliques:
        s = c & seen
        if s:
            seps.append(tuple(sorted(s)))
        seen |= c
    return JunctionStructure(tuple(tuple(sorted(c)) for c in cliques), tuple(seps))


def is_decomposable(g: Graph) -> bool:
    return decomposable_structure(g) is not None


def log_I_exact_decomposable(g: Graph, delta: float, D, structure: JunctionStructure | None = None) -> float:
    D = np.asarray(D, dtype=float)
    if structure is None:
        structure = decomposable_structure(g)
    if structure is None:
        raise NotDecomposable(f"{g!r} is not decomposable")
    total = 0.0
    for c in structure.cliques:
        total += log_I_complete(delta, D[np.ix_(c, c)])
    for s in structure.separators:
        total -= log_I_complete(delta, D[np.ix_(s, s)])
    return total


def _free_entries(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    edges = g.edges()
    rows = np.array(list(range(g.n)) + [i for i, _ in edges], dtype=np.int64)
    cols = np.array(list(range(g.n)) + [j for _, j in edges], dtype=np.int64)
    return rows, cols


@dataclass(frozen=True)
class ModeResult:
    K: np.ndarray
    sweeps: int
    residual: float


def gwishart_mode(g: Graph, delta_eff: float, D_eff) -> ModeResult:
    """Maximiser of ``((delta-2)/2) log|K| - tr(K D)/2`` over K with zeros off ``g``.

    At the optimum ``inv(K)`` equals ``D / (delta - 2)`` on the diagonal and on
    every edge.  The problem is solved on the correlation scale of that target
    and mapped back.
    """
    if not delta_eff > 2:
        raise ValueError("delta_eff must exceed 2")
    D_eff = _check_spd(D_eff, "D_eff")
    S = D_eff / (delta_eff - 2.0)
    scale = np.sqrt(np.diag(S))
    S_corr = S / np.outer(scale, scale)
    adj = g.to_adjacency().astype(bool)
    K_corr, _, sweeps = kernels.covsel_fit(S_corr, adj, MODE_TOL * 1e-3, MAX_SWEEPS)
    if K_corr is None or sweeps == -2:
        raise ModeFailure("lost positive definiteness while fitting the mode", graph=g)
    if sweeps == -1:
        raise ModeFailure(f"no convergence after {MAX_SWEEPS} sweeps", graph=g)
    free = adj | np.eye(g.n, dtype=bool)
    try:
        np.linalg.cholesky(K_corr)
        residual = float(np.abs(np.linalg.inv(K_corr) - S_corr)[free].max())
    except np.linalg.LinAlgError:
        raise ModeFailure("mode is not positive definite", graph=g) from None
    if residual >= MODE_TOL:
        raise ModeFailure(f"stationarity residual {residual:.3g} above {MODE_TOL}", graph=g)
    return ModeResult(K_corr / np.outer(scale, scale), sweeps, residual)


def _log_h(K, delta, D) -> float:
    sign, logdet = np.linalg.slogdet(K)
    return float((delta - 2.0) / 2.0 * logdet - np.sum(K * D) / 2.0)


def _trace_products(Sigma, rows, cols) -> np.ndarray:
    """``tr(Sigma J_e Sigma J_f)`` for all pairs of free entries."""
    s = np.where(rows == cols, 0.5, 1.0)
    A = Sigma[np.ix_(rows, rows)] * Sigma[np.ix_(cols, cols)]
    B = Sigma[np.ix_(rows, cols)] * Sigma[np.ix_(cols, rows)]
    return 2.0 * np.outer(s, s) * (A + B)


def laplace_hessian(g: Graph, K, delta: float) -> np.ndarray:
    """Negative Hessian of the log integrand over the free entries of ``K``."""
    rows, cols = _free_entries(g)
    return (delta - 2.0) / 2.0 * _trace_products(np.linalg.inv(K), rows, cols)


def log_I_laplace(g: Graph, delta: float, D) -> float:
    """Laplace approximation to ``log I_G(delta, D)``."""
    mode = gwishart_mode(g, delta, D)
    neg_h = laplace_hessian(g, mode.K, delta)
    try:
        chol = np.linalg.cholesky(neg_h)
    except np.linalg.LinAlgError:
        raise EstimatorError("Hessian at the mode is not negative definite", graph=g) from None
    logdet = 2.0 * float(np.log(np.diag(chol)).sum())
    q = neg_h.shape[0]
    out = _log_h(mode.K, delta, np.asarray(D, float)) + q / 2.0 * LOG_2PI - logdet / 2.0
    if not math.isfinite(out):
        raise EstimatorError("non-finite Laplace value", graph=g)
    return out


@dataclass(frozen=True)
class OracleEstimate:
    log_I: float
    se: float
    ess: float
    samples: int

    @property
    def estimate(self) -> float:
        return self.log_I


def _proposal(g: Graph, delta: float, D):
    """Off-diagonal proposal centres and spreads on the correlation scale of the mode."""
    rows, cols = _free_entries(g)
    n = g.n
    off = rows >= 0
    off[:n] = False
    try:
        mode = gwishart_mode(g, delta, D)
        cov = np.linalg.inv(laplace_hessian(g, mode.K, delta))
        d = np.sqrt(np.diag(mode.K))
        rho = mode.K[rows[off], cols[off]] / (d[rows[off]] * d[cols[off]])
        spread = 1.5 * np.sqrt(np.diag(cov)[off]) / (d[rows[off]] * d[cols[off]])
    except (EstimatorError, np.linalg.LinAlgError):
        rho = np.zeros(off.sum())
        spread = np.ones(off.sum())
    return rows[off], cols[off], rho, np.clip(spread, 0.05, 1.0)


def _oracle_chunk(g: Graph, delta, D, samples, rng, prop):
    n = g.n
    ei, ej, rho, spread = prop
    dd = np.diag(D)
    shape = delta / 2.0 + 1.0
    diag = rng.gamma(shape, 2.0 / dd, size=(samples, n))
    log_q = ((shape - 1.0) * np.log(diag) - diag * dd / 2.0
             + shape * np.log(dd / 2.0) - gammaln(shape)).sum(axis=1)
    K = np.zeros((samples, n, n))
    K[:, np.arange(n), np.arange(n)] = diag
    if ei.size:
        r = np.sqrt(diag[:, ei] * diag[:, ej])
        u = rng.normal(rho, spread, size=(samples, ei.size))
        kij = u * r
        K[:, ei, ej] = kij
        K[:, ej, ei] = kij
        log_q += (-0.5 * LOG_2PI - np.log(spread * r) - 0.5 * ((u - rho) / spread) ** 2).sum(axis=1)
    pd = np.ones(samples, dtype=bool)
    for k in range(1, n + 1):
        pd &= np.linalg.det(K[:, :k, :k]) > 0
    log_w = np.full(samples, -np.inf)
    if pd.any():
        Kp = K[pd]
        _, logdet = np.linalg.slogdet(Kp)
        log_f = (delta - 2.0) / 2.0 * logdet - np.einsum("sij,ij->s", Kp, D) / 2.0
        log_w[pd] = log_f - log_q[pd]
    return log_w


def log_I_importance_oracle(
    g: Graph, delta: float, D, samples: int = 100_000, rng=None, chunks: int = 1
) -> OracleEstimate:
    """Importance-sampling estimate of ``log I_G(delta, D)``.

    Diagonal entries are drawn from Gamma(delta/2 + 1, rate D_ii/2); each edge
    entry is ``u * sqrt(K_ii K_jj)`` with ``u`` normal around the mode's
    partial correlation.  Draws outside the positive definite cone get weight
    zero.  ``chunks`` splits the draws over independent child streams whose
    weights are pooled.  The standard error refers to ``log_I``.
    """
    D = _check_spd(D)
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    prop = _proposal(g, delta, D)
    sizes = [samples // chunks + (k < samples % chunks) for k in range(chunks)]
    streams = rng.spawn(chunks) if chunks > 1 else [rng]
    log_w = np.concatenate([_oracle_chunk(g, delta, D, s, r, prop) for s, r in zip(sizes, streams)])
    if not np.isfinite(log_w).any():
        raise EstimatorError("all importance weights are zero", term="oracle", graph=g)
    top = log_w.max()
    w = np.exp(log_w - top)
    mean = w.mean()
    ess = float(w.sum() ** 2 / (w**2).sum())
    se = float(w.std(ddof=1) / math.sqrt(samples) / mean)
    if ess < 100:
        raise EstimatorError(f"effective sample size {ess:.1f} below 100", term="oracle", graph=g)
    return OracleEstimate(float(top + math.log(mean)), se, ess, samples)


# Step approximator: (A, B, delta, D) -> log I_A(delta, D) - log I_B(delta, D)
# for graphs A, B that differ in one edge.
StepRatio = Callable[[Graph, Graph, float, np.ndarray], float]


class NormalizingConstants:
    """Per-graph log normalising constants for a chosen estimator, with a cache.

    ``exact-laplace``: exact when decomposable, Laplace otherwise.
    ``laplace``: Laplace for every graph.
    ``oracle``: exact when decomposable; otherwise Laplace for the posterior
    term and importance sampling for the prior term, seeded from the graph so
    repeated evaluations agree.
    """

    def __init__(self, estimator: str = "exact-laplace", oracle_samples: int = 100_000, seed: int = 0):
        if estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}")
        self.estimator = estimator
        self.oracle_samples = oracle_samples
        self.seed = seed
        self._cache: dict = {}

    def log_I(self, g: Graph, delta: float, D, term: str) -> float:
        key = (g.bits, term)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        try:
            val = self._evaluate(g, delta, D, term)
        except EstimatorError as err:
            raise EstimatorError(str(err), term=term, graph=g) from err
        self._cache[key] = val
        return val

    def _evaluate(self, g, delta, D, term):
        if self.estimator != "laplace":
            structure = decomposable_structure(g)
            if structure is not None:
                return log_I_exact_decomposable(g, delta, D, structure)
        if self.estimator == "oracle" and term == "prior":
            rng = np.random.default_rng([self.seed, g.n, *_limbs(g.bits)])
            return log_I_importance_oracle(g, delta, D, self.oracle_samples, rng).log_I
        return log_I_laplace(g, delta, D)

    def step_ratio(self, a: Graph, b: Graph, delta: float, D) -> float:
        return self.log_I(a, delta, D, "prior") - self.log_I(b, delta, D, "prior")


def _limbs(bits: int) -> list[int]:
    out = []
    while True:
        out.append(bits & 0xFFFFFFFF)
        bits >>= 32
        if not bits:
            return out


def single_edge_path(g: Graph, gp: Graph) -> list[Graph]:
    """Graphs visited when flipping the differing edges of ``g`` in lexicographic order."""
    diff = g.bits ^ gp.bits
    path = [g]
    bits = g.bits
    while diff:
        low = diff & -diff
        bits ^= low
        diff ^= low
        path.append(Graph(g.n, bits))
    return path


class MarginalLikelihood:
    """``log p(X | G)`` for fixed data and hyperparameters, cached per graph."""

    def __init__(
        self,
        data: Dataset,
        params: GWishartParams,
        estimator: str = "exact-laplace",
        oracle_samples: int = 100_000,
        seed: int = 0,
        step_ratio: StepRatio | None = None,
    ):
        if data.n != params.n:
            raise ValueError(f"data has {data.n} variables, D is {params.n}x{params.n}")
        self.data = data
        self.params = params
        self.constants = NormalizingConstants(estimator, oracle_samples, seed)
        self.step_ratio = step_ratio or self.constants.step_ratio
        self.delta_post = params.delta + data.N
        self.D_post = params.D + data.U
        self.offset = data.N * data.n / 2.0 * LOG_2PI

    @property
    def estimator(self) -> str:
        return self.constants.estimator

    def log_I_posterior(self, g: Graph) -> float:
        if self.data.N == 0:
            return self.log_I_prior(g)
        return self.constants.log_I(g, self.delta_post, self.D_post, "posterior")

    def log_I_prior(self, g: Graph) -> float:
        return self.constants.log_I(g, self.params.delta, self.params.D, "prior")

    def __call__(self, g: Graph) -> float:
        if self.data.N == 0:
            return 0.0
        return self.log_I_posterior(g) - self.offset - self.log_I_prior(g)

    def prior_ratio(self, g: Graph, gp: Graph) -> float:
        """``log I_G(delta, D) - log I_G'(delta, D)`` chained over single-edge steps."""
        if g.bits > gp.bits:
            return -self.prior_ratio(gp, g)
        path = single_edge_path(g, gp)
        return float(sum(self.step_ratio(a, b, self.params.delta, self.params.D)
                         for a, b in zip(path, path[1:])))

    def log_ratio(self, g: Graph, gp: Graph) -> float:
        """``log p(X | G') - log p(X | G)``."""
        if g.n != gp.n:
            raise ValueError("graphs have different vertex counts")
        if g.bits == gp.bits or self.data.N == 0:
            return 0.0
        return self.log_I_posterior(gp) - self.log_I_posterior(g) + self.prior_ratio(g, gp)


def log_marginal_likelihood(g: Graph, data: Dataset, params: GWishartParams,
                            estimator: str = "exact-laplace", **kw) -> float:
    return MarginalLikelihood(data, params, estimator, **kw)(g)


def log_ml_ratio(g: Graph, gp: Graph, data: Dataset, params: GWishartParams,
                 estimator: str = "exact-laplace", **kw) -> float:
    return MarginalLikelihood(data, params, estimator, **kw).log_ratio(g, gp)
