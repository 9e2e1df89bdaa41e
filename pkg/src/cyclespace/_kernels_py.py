"""Pure Python / numpy implementations of the hot kernels.

Each function here has a compiled twin in ``_kernels.pyx`` with the same
signature and results; :mod:`cyclespace.kernels` picks one at import time.
"""

from __future__ import annotations

import numpy as np


def xor_fold(probs, masks, m):
    """Distribution over ``2**m`` bit patterns of an XOR of independent masks.

    Starting from a point mass at 0, each ``(p, mask)`` maps
    ``dist <- (1 - p) * dist + p * dist[s ^ mask]``.
    """
    dist = np.zeros(1 << m)
    dist[0] = 1.0
    idx = np.arange(1 << m, dtype=np.int64)
    for p, mask in zip(np.asarray(probs, dtype=float), np.asarray(masks, dtype=np.int64)):
        dist = (1.0 - p) * dist + p * dist[idx ^ mask]
    return dist


def connected_spanning_flags(n, eu, ev):
    """For every subset of the ``m`` edges, 1 if it connects all ``n`` vertices."""
    m = len(eu)
    flags = np.zeros(1 << m, dtype=np.uint8)
    eu = [int(x) for x in eu]
    ev = [int(x) for x in ev]
    for s in range(1 << m):
        if s.bit_count() < n - 1:
            continue
        root = list(range(n))
        comps = n
        b = s
        while b:
            k = (b & -b).bit_length() - 1
            b &= b - 1
            x, y = eu[k], ev[k]
            while root[x] != x:
                x = root[x]
            while root[y] != y:
                y = root[y]
            if x != y:
                root[x] = y
                comps -= 1
        flags[s] = comps == 1
    return flags


def bareiss_det(a):
    """Exact determinant of an integer matrix by fraction-free elimination."""
    m = [list(map(int, row)) for row in a]
    size = len(m)
    if size == 0:
        return 1
    sign = 1
    prev = 1
    for k in range(size - 1):
        if m[k][k] == 0:
            for r in range(k + 1, size):
                if m[r][k] != 0:
                    m[k], m[r] = m[r], m[k]
                    sign = -sign
                    break
            else:
                return 0
        pivot = m[k][k]
        for i in range(k + 1, size):
            mik = m[i][k]
            row_i = m[i]
            row_k = m[k]
            for j in range(k + 1, size):
                row_i[j] = (row_i[j] * pivot - mik * row_k[j]) // prev
        prev = pivot
    return sign * m[-1][-1]


def reduced_laplacian(n, eu, ev, weights=None):
    lap = [[0] * n for _ in range(n)]
    for k, (i, j) in enumerate(zip(eu, ev)):
        w = 1 if weights is None else int(weights[k])
        lap[i][i] += w
        lap[j][j] += w
        lap[i][j] -= w
        lap[j][i] -= w
    return [row[:-1] for row in lap[:-1]]


def subset_tree_counts(n, eu, ev, flags):
    """Spanning-tree count of every flagged edge subset (0 elsewhere)."""
    out = [0] * len(flags)
    eu = [int(x) for x in eu]
    ev = [int(x) for x in ev]
    for s in np.flatnonzero(flags).tolist():
        ks = [k for k in range(len(eu)) if s >> k & 1]
        out[s] = bareiss_det(reduced_laplacian(n, [eu[k] for k in ks], [ev[k] for k in ks]))
    return out


def covsel_fit(S, adj, tol, max_sweeps):
    """Precision matrix with zeros off ``adj`` whose inverse matches ``S`` on ``adj``.

    Block coordinate sweeps over the columns of the covariance ``W``; each
    column solves the bordered system restricted to that vertex's neighbours.
    Returns ``(K, W, sweeps)``, with ``sweeps = -1`` if ``max_sweeps`` ran out
    and ``-2`` if a neighbour block lost positive definiteness.
    """
    S = np.asarray(S, dtype=float)
    adj = np.asarray(adj, dtype=bool)
    n = S.shape[0]
    W = S.copy()
    nbrs = [np.flatnonzero(adj[j]) for j in range(n)]
    status = -1
    for sweep in range(1, max_sweeps + 1):
        delta = 0.0
        for j in range(n):
            nb = nbrs[j]
            old = W[:, j].copy()
            if nb.size:
                try:
                    beta = np.linalg.solve(W[np.ix_(nb, nb)], S[nb, j])
                except np.linalg.LinAlgError:
                    return None, W, -2
                col = W[:, nb] @ beta
            else:
                col = np.zeros(n)
            col[j] = S[j, j]
            W[:, j] = col
            W[j, :] = col
            delta = max(delta, float(np.max(np.abs(col - old))))
        if delta < tol:
            status = sweep
            break
    K = np.zeros((n, n))
    for j in range(n):
        nb = nbrs[j]
        if nb.size:
            try:
                beta = np.linalg.solve(W[np.ix_(nb, nb)], W[nb, j])
            except np.linalg.LinAlgError:
                return None, W, -2
            k22 = 1.0 / (W[j, j] - W[j, nb] @ beta)
            K[nb, j] = -beta * k22
        else:
            k22 = 1.0 / W[j, j]
        K[j, j] = k22
    K = 0.5 * (K + K.T)
    return K, W, status
