# Compiled twins of the functions in _kernels_py.py.  Signatures and results
# must stay identical; tests run both backends against each other.

import numpy as np
cimport numpy as cnp

from libc.math cimport fabs, sqrt

cnp.import_array()

cdef extern from *:
    """
    typedef __int128 cs_int128;
    """
    ctypedef long long cs_int128
    int __builtin_popcountll(unsigned long long) nogil


def xor_fold(probs, masks, int m):
    cdef double[::1] p = np.ascontiguousarray(probs, dtype=np.float64)
    cdef cnp.int64_t[::1] mk = np.ascontiguousarray(masks, dtype=np.int64)
    cdef Py_ssize_t size = (<Py_ssize_t>1) << m
    a = np.zeros(size)
    b = np.empty(size)
    cdef double[::1] cur = a
    cdef double[::1] nxt = b
    cdef double[::1] tmp
    cdef Py_ssize_t s, c
    cdef cnp.int64_t msk
    cdef double pp, q
    cur[0] = 1.0
    for c in range(p.shape[0]):
        pp = p[c]
        q = 1.0 - pp
        msk = mk[c]
        for s in range(size):
            nxt[s] = q * cur[s] + pp * cur[s ^ msk]
        tmp = cur
        cur = nxt
        nxt = tmp
    return np.array(cur, copy=True)


cdef inline int _find(cnp.int64_t[::1] root, int x) noexcept nogil:
    while root[x] != x:
        root[x] = root[root[x]]
        x = <int>root[x]
    return x


def connected_spanning_flags(int n, eu, ev):
    cdef cnp.int64_t[::1] u = np.ascontiguousarray(eu, dtype=np.int64)
    cdef cnp.int64_t[::1] v = np.ascontiguousarray(ev, dtype=np.int64)
    cdef Py_ssize_t m = u.shape[0]
    flags = np.zeros((<Py_ssize_t>1) << m, dtype=np.uint8)
    cdef cnp.uint8_t[::1] f = flags
    root_arr = np.empty(max(n, 1), dtype=np.int64)
    cdef cnp.int64_t[::1] root = root_arr
    cdef unsigned long long s, b, total = (<unsigned long long>1) << m
    cdef int k, x, y, comps, i
    with nogil:
        for s in range(total):
            if __builtin_popcountll(s) < n - 1:
                continue
            for i in range(n):
                root[i] = i
            comps = n
            b = s
            while b:
                k = 0
                while not (b >> k) & 1:
                    k += 1
                b &= b - 1
                x = _find(root, <int>u[k])
                y = _find(root, <int>v[k])
                if x != y:
                    root[x] = y
                    comps -= 1
            f[s] = comps == 1
    return flags


cdef cnp.int64_t _bareiss(cnp.int64_t[:, ::1] M, int N) noexcept nogil:
    cdef int k, i, j, r
    cdef cnp.int64_t prev = 1, pivot, t
    cdef int sign = 1
    cdef cs_int128 acc
    if N == 0:
        return 1
    for k in range(N - 1):
        if M[k, k] == 0:
            r = k + 1
            while r < N and M[r, k] == 0:
                r += 1
            if r == N:
                return 0
            for j in range(N):
                t = M[k, j]
                M[k, j] = M[r, j]
                M[r, j] = t
            sign = -sign
        pivot = M[k, k]
        for i in range(k + 1, N):
            for j in range(k + 1, N):
                acc = (<cs_int128>M[i, j]) * pivot - (<cs_int128>M[i, k]) * M[k, j]
                M[i, j] = <cnp.int64_t>(acc / prev)
        prev = pivot
    return sign * M[N - 1, N - 1]


def subset_tree_counts(int n, eu, ev, flags):
    """Valid for n <= 13 (all Bareiss minors then fit in int64)."""
    cdef cnp.int64_t[::1] u = np.ascontiguousarray(eu, dtype=np.int64)
    cdef cnp.int64_t[::1] v = np.ascontiguousarray(ev, dtype=np.int64)
    cdef cnp.uint8_t[::1] f = np.ascontiguousarray(flags, dtype=np.uint8)
    cdef Py_ssize_t total = f.shape[0]
    cdef int N = n - 1
    out = np.zeros(total, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    mat = np.zeros((max(N, 1), max(N, 1)), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] M = mat
    cdef Py_ssize_t s
    cdef int k, a, b, i, j, m = u.shape[0]
    with nogil:
        for s in range(total):
            if not f[s]:
                continue
            for i in range(N):
                for j in range(N):
                    M[i, j] = 0
            for k in range(m):
                if not (s >> k) & 1:
                    continue
                a = <int>u[k]
                b = <int>v[k]
                if a < N:
                    M[a, a] += 1
                if b < N:
                    M[b, b] += 1
                if a < N and b < N:
                    M[a, b] -= 1
                    M[b, a] -= 1
            o[s] = _bareiss(M, N)
    return out.tolist()


cdef int _chol_solve(double[:, ::1] A, double[::1] rhs, double[::1] x, int d) noexcept nogil:
    # In-place Cholesky of the leading d x d block of A, then solve A x = rhs.
    cdef int i, j, k
    cdef double s
    for j in range(d):
        s = A[j, j]
        for k in range(j):
            s -= A[j, k] * A[j, k]
        if s <= 0.0:
            return -1
        A[j, j] = sqrt(s)
        for i in range(j + 1, d):
            s = A[i, j]
            for k in range(j):
                s -= A[i, k] * A[j, k]
            A[i, j] = s / A[j, j]
    for i in range(d):
        s = rhs[i]
        for k in range(i):
            s -= A[i, k] * x[k]
        x[i] = s / A[i, i]
    for i in range(d - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, d):
            s -= A[k, i] * x[k]
        x[i] = s / A[i, i]
    return 0


def covsel_fit(S_in, adj_in, double tol, int max_sweeps):
    cdef double[:, ::1] S = np.ascontiguousarray(S_in, dtype=np.float64)
    cdef int n = S.shape[0]
    W_arr = np.array(S, copy=True)
    cdef double[:, ::1] W = W_arr
    adj = np.ascontiguousarray(adj_in, dtype=bool)
    nb_arr = np.zeros((n, max(n, 1)), dtype=np.int64)
    deg_arr = np.zeros(n, dtype=np.int64)
    for j in range(n):
        idx = np.flatnonzero(adj[j])
        nb_arr[j, :idx.size] = idx
        deg_arr[j] = idx.size
    cdef cnp.int64_t[:, ::1] nb = nb_arr
    cdef cnp.int64_t[::1] deg = deg_arr
    cdef double[:, ::1] A = np.empty((max(n, 1), max(n, 1)))
    cdef double[::1] rhs = np.empty(max(n, 1))
    cdef double[::1] beta = np.empty(max(n, 1))
    cdef double[::1] col = np.empty(max(n, 1))
    cdef int sweep, jj, i, k, l, d, status = -1
    cdef double delta, acc, diff
    with nogil:
        for sweep in range(1, max_sweeps + 1):
            delta = 0.0
            for jj in range(n):
                d = <int>deg[jj]
                for k in range(d):
                    for l in range(d):
                        A[k, l] = W[nb[jj, k], nb[jj, l]]
                    rhs[k] = S[nb[jj, k], jj]
                if d > 0 and _chol_solve(A, rhs, beta, d) < 0:
                    status = -2
                    break
                for i in range(n):
                    if i == jj:
                        col[i] = S[jj, jj]
                        continue
                    acc = 0.0
                    for k in range(d):
                        acc += W[i, nb[jj, k]] * beta[k]
                    col[i] = acc
                for i in range(n):
                    diff = fabs(col[i] - W[i, jj])
                    if diff > delta:
                        delta = diff
                    W[i, jj] = col[i]
                    W[jj, i] = col[i]
            if status == -2:
                break
            if delta < tol:
                status = sweep
                break
    if status == -2:
        return None, W_arr, -2
    K_arr = np.zeros((n, n))
    cdef double[:, ::1] K = K_arr
    cdef double k22
    with nogil:
        for jj in range(n):
            d = <int>deg[jj]
            for k in range(d):
                for l in range(d):
                    A[k, l] = W[nb[jj, k], nb[jj, l]]
                rhs[k] = W[nb[jj, k], jj]
            if d > 0 and _chol_solve(A, rhs, beta, d) < 0:
                status = -2
                break
            acc = W[jj, jj]
            for k in range(d):
                acc -= W[jj, nb[jj, k]] * beta[k]
            k22 = 1.0 / acc
            K[jj, jj] = k22
            for k in range(d):
                K[nb[jj, k], jj] = -beta[k] * k22
    if status == -2:
        return None, W_arr, -2
    K_arr = 0.5 * (K_arr + K_arr.T)
    return K_arr, W_arr, status
