"""Backend selection for the point-cloud kernels.

The compiled extension is used when it imports; otherwise (or when the
environment variable ``UNILEARN_PURE_PYTHON`` is set to a non-empty value)
the numpy fallback is used. Both backends expose:

``hat_values(X, y, M, s)``
    Unscaled hat function at each row of ``X``; exactly 0.0 whenever some
    active coordinate satisfies ``M * |x_j - y_j| >= 1 - 1e-12``. In that
    band the true value is below 1e-12, and the margin keeps adjacent
    fooling boxes disjoint after rounding.
``grid_cells(X, K)``
    Row-major flat index of the half-open lattice cell containing each row,
    top faces closed.
``touched_cells(X, k, s)``
    Boolean mask over the ``(4k)**s`` fooling cells whose support box
    (steepness ``8k``, same margin as ``hat_values``) contains at least one
    row of ``X``. A hat planted in an unmarked cell is exactly 0.0 at every
    row of ``X``.
"""
import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_impl = _pykernels

if not os.environ.get("UNILEARN_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _impl = _pykernels


def _points(X, d=None):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1) if d is None or X.size == d else X.reshape(-1, d)
    return X


def hat_values(X, y, M, s, impl=None):
    impl = impl or _impl
    y = np.ascontiguousarray(y, dtype=np.float64)
    X = _points(X, y.size)
    if X.shape[1] < s or y.size < s:
        raise ValueError(f"need at least s={s} coordinates, got {X.shape[1]}")
    return impl.hat_values(X, y, float(M), int(s))


def grid_cells(X, K, impl=None):
    impl = impl or _impl
    return impl.grid_cells(_points(X), int(K))


def touched_cells(X, k, s, impl=None):
    impl = impl or _impl
    X = _points(X)
    if X.shape[1] < s:
        raise ValueError(f"need at least s={s} coordinates, got {X.shape[1]}")
    return impl.touched_cells(X, int(k), int(s))
