"""Pure numpy versions of the compiled kernels.

Each function performs the same floating point operations in the same
order as its counterpart in ``_ckernels.pyx``; the test suite checks that
both backends agree exactly.
"""
import itertools

import numpy as np

# A point counts as inside a support box of half-width 1/M only when
# M * |x - y| < EDGE. The margin keeps adjacent fooling boxes disjoint after
# rounding, so a query on a shared face touches at most one box.
EDGE = 1.0 - 1e-12


def hat_values(X, y, M, s):
    X = np.asarray(X, dtype=np.float64)
    M = float(M)
    acc = np.zeros(X.shape[0])
    inside = np.ones(X.shape[0], dtype=bool)
    for j in range(s):
        a = M * np.abs(X[:, j] - y[j])
        inside &= a < EDGE
        acc = acc + (1.0 - a)
    acc = acc - float(s - 1)
    return np.where(inside & (acc > 0.0), acc, 0.0)


def _cell(x, K):
    idx = np.floor(x * K).astype(np.int64)
    lo = idx < 0
    hi = idx > K - 1
    mid = ~lo & ~hi
    up = mid & (idx + 1 <= K - 1) & (x >= (idx + 1).astype(np.float64) / K)
    down = mid & ~up & (idx > 0) & (x < idx.astype(np.float64) / K)
    out = np.where(up, idx + 1, np.where(down, idx - 1, idx))
    out = np.where(lo, 0, np.where(hi, K - 1, out))
    return out.astype(np.int64)


def grid_cells(X, K):
    X = np.asarray(X, dtype=np.float64)
    flat = np.zeros(X.shape[0], dtype=np.int64)
    for j in range(X.shape[1]):
        flat = flat * K + _cell(X[:, j], K)
    return flat


def touched_cells(X, k, s):
    X = np.asarray(X, dtype=np.float64)
    side = 4 * k
    M = 8.0 * k
    mask = np.zeros(side**s, dtype=bool)
    if X.shape[0] == 0:
        return mask
    cands, valid = [], []
    for j in range(s):
        base = np.floor(X[:, j] * side).astype(np.int64) + 1
        t = base[:, None] + np.arange(-1, 2)[None, :]
        centre = (2.0 * t - 1.0) / (8.0 * k)
        ok = (t >= 1) & (t <= side) & (M * np.abs(X[:, j, None] - centre) < EDGE)
        cands.append(t - 1)
        valid.append(ok)
    for combo in itertools.product(range(3), repeat=s):
        flat = np.zeros(X.shape[0], dtype=np.int64)
        good = np.ones(X.shape[0], dtype=bool)
        for j, c in enumerate(combo):
            flat = flat * side + cands[j][:, c]
            good &= valid[j][:, c]
        mask[flat[good]] = True
    return mask
