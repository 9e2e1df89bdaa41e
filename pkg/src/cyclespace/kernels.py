"""Backend selection for the hot kernels.

The compiled extension ``cyclespace._kernels`` is used when it imports;
otherwise, or when ``CYCLESPACE_PURE_PYTHON=1`` is set, the numpy versions in
``cyclespace._kernels_py`` are used.  ``subset_tree_counts`` also drops to the
pure path for graphs too large for the int64 kernel.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("CYCLESPACE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        _compiled = None
    else:
        _impl = _compiled
        BACKEND = "cython"
else:
    _compiled = None

# Bareiss minors of a reduced Laplacian stay below 2**63 up to this order.
INT64_TREE_COUNT_MAX_N = 13


def available_backends() -> dict:
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out


def xor_fold(probs, masks, m):
    return _impl.xor_fold(probs, masks, m)


def connected_spanning_flags(n, eu, ev):
    return _impl.connected_spanning_flags(n, eu, ev)


def subset_tree_counts(n, eu, ev, flags):
    if n > INT64_TREE_COUNT_MAX_N:
        return _kernels_py.subset_tree_counts(n, eu, ev, flags)
    return _impl.subset_tree_counts(n, eu, ev, flags)


def covsel_fit(S, adj, tol, max_sweeps):
    return _impl.covsel_fit(S, adj, tol, max_sweeps)


bareiss_det = _kernels_py.bareiss_det
