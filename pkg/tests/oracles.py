"""Brute-force reference implementations used only by the tests.

These avoid the package's algorithms: spanning trees by subset enumeration,
Y(G, k) by enumerating k-sets of trees, integrals by quadrature.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from cyclespace.graphs import Graph, num_pairs


def all_graphs(n):
    for bits in range(1 << num_pairs(n)):
        yield Graph(n, bits)


def even_degrees(g):
    deg = [0] * g.n
    for i, j in g.edges():
        deg[i] += 1
        deg[j] += 1
    return all(d % 2 == 0 for d in deg)


def _is_spanning_tree(n, edges):
    if len(edges) != n - 1:
        return False
    root = list(range(n))

    def find(x):
        while root[x] != x:
            x = root[x]
        return x

    for u, v in edges:
        a, b = find(u), find(v)
        if a == b:
            return False
        root[a] = b
    return True


def spanning_trees(g):
    """All spanning trees of ``g`` as edge-bit masks."""
    edges = g.edges()
    out = []
    for sub in itertools.combinations(range(len(edges)), g.n - 1):
        es = [edges[k] for k in sub]
        if _is_spanning_tree(g.n, es):
            out.append(Graph.from_edges(g.n, es).bits)
    if g.n == 1:
        out = [0]
    return out


def union_count(g, k):
    trees = spanning_trees(g)
    total = 0
    for combo in itertools.combinations(trees, k):
        acc = 0
        for t in combo:
            acc |= t
        total += acc == g.bits
    return total


def lambda_brute(g, t0_bits):
    target = g.bits | t0_bits
    return sum(1 for t in spanning_trees(Graph.complete(g.n)) if g.bits | t == target)


def random_connected_graph(n, rng, p=0.5):
    while True:
        bits = 0
        for k in range(num_pairs(n)):
            if rng.random() < p:
                bits |= 1 << k
        g = Graph(n, bits)
        if n == 1 or _connected(g):
            return g


def _connected(g):
    seen = {0}
    stack = [0]
    adj = {v: [] for v in range(g.n)}
    for i, j in g.edges():
        adj[i].append(j)
        adj[j].append(i)
    while stack:
        v = stack.pop()
        for u in adj[v]:
            if u not in seen:
                seen.add(u)
                stack.append(u)
    return len(seen) == g.n


def log_gwishart_1d(delta, d):
    """log of the integral of k^{(delta-2)/2} exp(-k d / 2) over k > 0 by quadrature."""
    a = (delta - 2) / 2
    mode = max(a, 1e-3) * 2 / d
    logpeak = a * math.log(mode) - mode * d / 2
    val, _ = integrate.quad(lambda k: math.exp(a * math.log(k) - k * d / 2 - logpeak) if k > 0 else 0.0,
                            0, np.inf, epsabs=0, epsrel=1e-12, limit=500)
    return logpeak + math.log(val)


def log_gwishart_2x2(delta, D):
    """log I for the complete graph on two vertices by 2-D quadrature.

    With K = [[a, c], [c, b]] substitute b = s + c^2 / a; the integral over the
    Schur complement s > 0 is a gamma integral, leaving (a, c) to quadrature.
    """
    D = np.asarray(D, float)
    e = (delta - 2) / 2
    log_s = gammaln(delta / 2) + (delta / 2) * math.log(2 / D[1, 1])

    def logf(c, a):
        return e * math.log(a) - (a * D[0, 0] + c * c * D[1, 1] / a + 2 * c * D[0, 1]) / 2

    # the c-integrand is Gaussian: centre -a D01 / D11, sd sqrt(a / D11)
    a0 = (delta - 1) / (D[0, 0] - D[0, 1] ** 2 / D[1, 1])
    peak = logf(-a0 * D[0, 1] / D[1, 1], a0)

    def inner(a):
        mu = -a * D[0, 1] / D[1, 1]
        sd = math.sqrt(a / D[1, 1])
        v, _ = integrate.quad(lambda c: math.exp(logf(c, a) - peak), mu - 12 * sd, mu + 12 * sd,
                              epsabs=0, epsrel=1e-12, limit=200)
        return v

    hi = a0 * 20 + 50
    outer, _ = integrate.quad(inner, 0, hi, epsabs=0, epsrel=1e-11, limit=500, points=[a0])
    return log_s + peak + math.log(outer)
