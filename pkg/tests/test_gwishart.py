import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gammaln

from cyclespace import gwishart as gw
from cyclespace.graphs import Graph, num_pairs
from oracles import log_gwishart_1d, log_gwishart_2x2

PATH3 = Graph.from_edges(3, [(0, 1), (1, 2)])
C4 = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 3)])


def is_chordal_by_elimination(g):
    """Chordal iff simplicial vertices can be peeled off until nothing is left."""
    nbr = {v: set(g.neighbors(v)) for v in range(g.n)}
    while nbr:
        for v, ns in nbr.items():
            if all(b in nbr[a] for a, b in itertools.combinations(ns, 2)):
                break
        else:
            return False
        for u in nbr[v]:
            nbr[u].discard(v)
        del nbr[v]
    return True


def random_spd(n, rng, scale=1.0):
    A = rng.normal(size=(n, n + 2))
    return scale * (A @ A.T / (n + 2) + 0.5 * np.eye(n))


def test_params_validation():
    with pytest.raises(ValueError):
        gw.GWishartParams(2.0, np.eye(2))
    with pytest.raises(ValueError):
        gw.GWishartParams(3.0, np.array([[1.0, 0.5], [0.4, 1.0]]))
    with pytest.raises(ValueError):
        gw.GWishartParams(3.0, np.array([[1.0, 2.0], [2.0, 1.0]]))
    p = gw.GWishartParams.default(4)
    assert p.delta == 3.0 and np.array_equal(p.D, np.eye(4))


def test_dataset_centering():
    X = np.column_stack([np.zeros(5), np.arange(5.0)])
    d = gw.Dataset.from_matrix(X)
    assert d.N == 5 and d.n == 2
    assert np.all(d.U[0] == 0) and np.all(d.U[:, 0] == 0)
    with pytest.raises(ValueError):
        gw.Dataset.from_matrix(np.zeros((0, 3)))


def test_multigamma_examples():
    assert gw.log_multigamma(1, 1.5) == pytest.approx(gammaln(1.5))
    assert gw.log_multigamma(2, 2.0) == pytest.approx(0.5 * math.log(math.pi) + gammaln(2) + gammaln(1.5))
    for a in (1.5, 3.0, 7.25):
        lhs = gw.log_multigamma(3, a)
        rhs = math.log(math.pi) + gammaln(a) + gw.log_multigamma(2, a - 0.5)
        assert lhs == pytest.approx(rhs, abs=1e-12)
    with pytest.raises(ValueError):
        gw.log_multigamma(3, 0.9)


def test_log_I_complete_one_dimensional():
    assert gw.log_I_complete(3, [[1.0]]) == pytest.approx(math.log(2**1.5 * math.gamma(1.5)), abs=1e-12)
    assert math.exp(gw.log_I_complete(3, [[1.0]])) == pytest.approx(2.5066, abs=1e-4)
    for delta, d in [(3, 1.0), (5.5, 2.0), (40, 0.3)]:
        closed = delta / 2 * math.log(2) - delta / 2 * math.log(d) + gammaln(delta / 2)
        assert gw.log_I_complete(delta, [[d]]) == pytest.approx(closed, abs=1e-12)
        assert gw.log_I_complete(delta, [[d]]) == pytest.approx(log_gwishart_1d(delta, d), abs=1e-9)


def test_log_I_complete_two_dimensional_quadrature():
    rng = np.random.default_rng(0)
    for delta in (3, 8, 30):
        D = random_spd(2, rng)
        assert gw.log_I_complete(delta, D) == pytest.approx(log_gwishart_2x2(delta, D), abs=1e-8)


def test_log_I_complete_rejects_indefinite():
    with pytest.raises(ValueError):
        gw.log_I_complete(3, np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_decomposable_examples():
    s = gw.decomposable_structure(Graph.complete(3))
    assert s.cliques == ((0, 1, 2),) and s.separators == ()
    assert gw.decomposable_structure(C4) is None
    s = gw.decomposable_structure(PATH3)
    assert sorted(s.cliques) == [(0, 1), (1, 2)] and s.separators == ((1,),)


def graphs(max_n=7):
    return st.integers(1, max_n).flatmap(
        lambda n: st.integers(0, (1 << num_pairs(n)) - 1).map(lambda b: Graph(n, b))
    )


@given(graphs())
@settings(max_examples=300, deadline=None)
def test_junction_structure_properties(g):
    s = gw.decomposable_structure(g)
    assert (s is not None) == is_chordal_by_elimination(g)
    if s is None:
        return
    covered = set()
    for c in s.cliques:
        for a, b in itertools.combinations(c, 2):
            assert g.has_edge(a, b)
            covered.add((a, b))
    assert covered == set(g.edges())
    assert set().union(*map(set, s.cliques)) == set(range(g.n))
    seen = set()
    for c in s.cliques:
        sep = set(c) & seen
        if sep:
            assert any(sep <= set(prev) for prev in s.cliques[: s.cliques.index(c)])
        seen |= set(c)
    # clique/separator sizes give the vertex count (junction forest identity)
    assert sum(map(len, s.cliques)) - sum(map(len, s.separators)) == g.n


def test_exact_decomposable_examples():
    one = math.log(2**1.5 * math.gamma(1.5))
    assert gw.log_I_exact_decomposable(Graph.empty(3), 3, np.eye(3)) == pytest.approx(3 * one, abs=1e-12)
    D = random_spd(3, np.random.default_rng(1))
    assert gw.log_I_exact_decomposable(Graph.complete(3), 4, D) == gw.log_I_complete(4, D)
    with pytest.raises(gw.NotDecomposable):
        gw.log_I_exact_decomposable(C4, 3, np.eye(4))


def test_exact_single_edge_quadrature():
    D = np.array([[1.5, 0.3], [0.3, 0.8]])
    g = Graph.complete(2)
    assert gw.log_I_exact_decomposable(g, 6, D) == pytest.approx(log_gwishart_2x2(6, D), abs=1e-8)


def test_mode_examples():
    m = gw.gwishart_mode(Graph.empty(3), 5, np.eye(3))
    assert np.allclose(m.K, 3 * np.eye(3), atol=1e-12)
    D = random_spd(4, np.random.default_rng(2))
    m = gw.gwishart_mode(Graph.complete(4), 7, D)
    assert np.allclose(m.K, 5 * np.linalg.inv(D), atol=1e-9)


@given(graphs(8), st.floats(2.5, 200), st.integers(0, 1000))
@settings(max_examples=80, deadline=None)
def test_mode_stationarity(g, delta, seed):
    D = random_spd(g.n, np.random.default_rng(seed), scale=10.0)
    m = gw.gwishart_mode(g, delta, D)
    free = g.to_adjacency().astype(bool) | np.eye(g.n, dtype=bool)
    assert np.abs(np.linalg.inv(m.K) - D / (delta - 2))[free].max() < 1e-9 * max(1.0, np.abs(D).max() / (delta - 2))
    assert np.all(m.K[~free] == 0)
    np.linalg.cholesky(m.K)


def test_laplace_examples():
    exact = gw.log_I_complete(103, [[1.0]])
    assert abs(gw.log_I_laplace(Graph.empty(1), 103, np.eye(1)) - exact) < 0.01
    ex = gw.log_I_exact_decomposable(PATH3, 100, np.eye(3))
    assert abs(gw.log_I_laplace(PATH3, 100, np.eye(3)) - ex) / abs(ex) < 0.01
    ex = gw.log_I_complete(50, np.eye(2))
    assert abs(gw.log_I_laplace(Graph.complete(2), 50, np.eye(2)) - ex) / abs(ex) < 0.01


@pytest.mark.parametrize("g", [Graph.empty(3), PATH3, Graph.complete(3), Graph.complete(4),
                               Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 2)])])
def test_laplace_error_decreases_with_delta(g):
    errs = [abs(gw.log_I_laplace(g, d, np.eye(g.n)) - gw.log_I_exact_decomposable(g, d, np.eye(g.n)))
            for d in (10, 50, 100, 500)]
    assert all(a > b for a, b in zip(errs, errs[1:]))


def _within(est, exact, k=3.0):
    return abs(est.log_I - exact) <= k * est.se


def test_oracle_examples():
    one = math.log(2**1.5 * math.gamma(1.5))
    est = gw.log_I_importance_oracle(Graph.empty(2), 3, np.eye(2), 100_000, np.random.default_rng(0))
    assert _within(est, 2 * one) and est.ess >= 100
    est = gw.log_I_importance_oracle(Graph.complete(2), 3, np.eye(2), 100_000, np.random.default_rng(1))
    assert _within(est, gw.log_I_exact_decomposable(Graph.complete(2), 3, np.eye(2)))
    est = gw.log_I_importance_oracle(PATH3, 3, np.eye(3), 100_000, np.random.default_rng(2))
    assert _within(est, gw.log_I_exact_decomposable(PATH3, 3, np.eye(3)))


def test_oracle_complete_two_by_two():
    est = gw.log_I_importance_oracle(Graph.complete(2), 3, np.eye(2), 100_000, np.random.default_rng(3))
    assert _within(est, gw.log_I_complete(3, np.eye(2)))


def test_oracle_four_cycle_stable_across_seeds():
    a, b = (gw.log_I_importance_oracle(C4, 3, np.eye(4), 100_000, np.random.default_rng(s)) for s in (10, 11))
    assert math.isfinite(a.log_I) and a.ess >= 100 and b.ess >= 100
    assert abs(a.log_I - b.log_I) <= 3 * math.hypot(a.se, b.se)


def test_oracle_chunks_pool_streams():
    est = gw.log_I_importance_oracle(PATH3, 10, np.eye(3), 100_000, np.random.default_rng(4), chunks=4)
    assert est.samples == 100_000
    assert _within(est, gw.log_I_exact_decomposable(PATH3, 10, np.eye(3)))


@pytest.mark.parametrize("n", [2, 3])
@pytest.mark.parametrize("delta", [3, 10])
def test_oracle_matches_exact_small(n, delta):
    for bits in range(1 << num_pairs(n)):
        g = Graph(n, bits)
        est = gw.log_I_importance_oracle(g, delta, np.eye(n), 100_000, np.random.default_rng([n, bits, delta]))
        assert _within(est, gw.log_I_exact_decomposable(g, delta, np.eye(n)))


def simulated(n, N, seed, K=None):
    rng = np.random.default_rng(seed)
    K = np.eye(n) if K is None else K
    X = rng.multivariate_normal(np.zeros(n), np.linalg.inv(K), size=N)
    return gw.Dataset.from_matrix(X)


@pytest.mark.parametrize("estimator", gw.ESTIMATORS)
def test_no_data_gives_zero(estimator):
    params = gw.GWishartParams.default(4)
    data = gw.Dataset.empty(4)
    for g in (Graph.empty(4), C4, Graph.complete(4)):
        assert gw.log_marginal_likelihood(g, data, params, estimator) == 0.0


def test_marginal_likelihood_quadrature_two_vertices():
    data = simulated(2, 6, 5, np.array([[1.0, 0.4], [0.4, 1.0]]))
    params = gw.GWishartParams(3.0, np.array([[1.0, 0.2], [0.2, 1.5]]))
    g = Graph.complete(2)
    quad = (log_gwishart_2x2(params.delta + data.N, params.D + data.U)
            - data.N * 2 / 2 * math.log(2 * math.pi) - log_gwishart_2x2(params.delta, params.D))
    assert gw.log_marginal_likelihood(g, data, params) == pytest.approx(quad, abs=1e-3)


def test_marginal_likelihood_decomposable_identity():
    data = simulated(4, 15, 6)
    params = gw.GWishartParams.default(4)
    g = Graph.from_edges(4, [(0, 1), (1, 2), (0, 2), (2, 3)])
    direct = (gw.log_I_exact_decomposable(g, params.delta + data.N, params.D + data.U)
              - data.N * data.n / 2 * math.log(2 * math.pi)
              - gw.log_I_exact_decomposable(g, params.delta, params.D))
    assert gw.log_marginal_likelihood(g, data, params) == direct


def test_ratio_examples():
    data = simulated(3, 12, 7)
    params = gw.GWishartParams.default(3)
    tri, empty = Graph.complete(3), Graph.empty(3)
    assert gw.log_ml_ratio(tri, tri, data, params) == 0.0
    expected = gw.log_marginal_likelihood(tri, data, params) - gw.log_marginal_likelihood(empty, data, params)
    assert gw.log_ml_ratio(empty, tri, data, params) == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize("estimator", gw.ESTIMATORS)
def test_ratio_antisymmetric(estimator):
    data = simulated(4, 10, 8)
    ml = gw.MarginalLikelihood(data, gw.GWishartParams.default(4), estimator, oracle_samples=20_000)
    pairs = [(Graph.empty(4), C4), (C4, Graph.complete(4)), (Graph.from_edges(4, [(0, 1), (1, 2), (0, 2)]), C4)]
    for g, gp in pairs:
        assert ml.log_ratio(g, gp) == pytest.approx(-ml.log_ratio(gp, g), abs=1e-10)


def exact_step(a, b, delta, D):
    return gw.log_I_exact_decomposable(a, delta, D) - gw.log_I_exact_decomposable(b, delta, D)


def test_chain_permutation_invariance_exact_steps():
    # every intermediate graph between these two is chordal (n = 3)
    params = gw.GWishartParams.default(3)
    data = simulated(3, 9, 9)
    ml = gw.MarginalLikelihood(data, params, step_ratio=exact_step)
    g, gp = Graph.empty(3), Graph.complete(3)
    diff = gp.edges()
    values = set()
    for perm in itertools.permutations(diff):
        cur, total = g, 0.0
        for e in perm:
            nxt = cur ^ Graph.from_edges(3, [e])
            total += exact_step(cur, nxt, params.delta, params.D)
            cur = nxt
        values.add(round(total, 12))
    assert len(values) == 1
    assert ml.prior_ratio(g, gp) == pytest.approx(values.pop(), abs=1e-12)
    assert ml.log_ratio(g, gp) == pytest.approx(ml(gp) - ml(g), abs=1e-10)


def test_pluggable_step_is_used():
    calls = []

    def step(a, b, delta, D):
        calls.append((a.bits, b.bits))
        return 0.0

    ml = gw.MarginalLikelihood(simulated(3, 5, 1), gw.GWishartParams.default(3), step_ratio=step)
    ml.log_ratio(Graph.empty(3), Graph.complete(3))
    assert len(calls) == 3


def test_estimator_failure_names_term(monkeypatch):
    def boom(*a, **k):
        raise gw.ModeFailure("no convergence")

    monkeypatch.setattr(gw, "log_I_laplace", boom)
    ml = gw.MarginalLikelihood(simulated(4, 10, 2), gw.GWishartParams.default(4))
    with pytest.raises(gw.EstimatorError) as info:
        ml(C4)
    assert info.value.term == "posterior"
    assert "posterior term" in str(info.value)


def test_oracle_estimator_is_deterministic():
    data = simulated(4, 10, 3)
    params = gw.GWishartParams.default(4)
    a = gw.log_marginal_likelihood(C4, data, params, "oracle", oracle_samples=20_000)
    b = gw.log_marginal_likelihood(C4, data, params, "oracle", oracle_samples=20_000)
    assert a == b
