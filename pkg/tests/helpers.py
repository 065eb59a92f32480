"""Shared parameter grids for the test modules."""
import itertools

import numpy as np

from unilearn.experiments import sample_teacher
from unilearn.hats import HatSpec
from unilearn.nn import INF, NetworkClass, coefficient_norm

GRID_D = (1, 2, 3)
GRID_L = (3, 4, 5)
GRID_B = (3, 6, 9)
GRID_C = (0.5, 1.0, 2.0)
GRID_Q = (1, 1.5, 2, 3, INF)
GRID_M = (1, 2, 8)


def construction_grid(seed=0):
    """Every (class, hat, branch) on the parameter grid, with seeded random
    centre and sign; q == 2 appears once per branch."""
    rng = np.random.default_rng(seed)
    for d, L, B, c, q, M in itertools.product(GRID_D, GRID_L, GRID_B, GRID_C, GRID_Q, GRID_M):
        for s in range(1, min(B // 3, d) + 1):
            cls = NetworkClass.uniform(d, B, L, c, q)
            spec = HatSpec(d, s, M, rng.random(d), nu=int(rng.choice([-1, 1])))
            branches = ["big"] if q > 2 else ["small"] if q < 2 else ["big", "small"]
            for br in branches:
                yield cls, spec, br


def in_class_net(cls, seed):
    """A random member of ``cls``: uniform coefficients on [-c, c] for
    q = inf, otherwise uniform coefficients rescaled onto the class boundary."""
    if cls.q == INF:
        return sample_teacher(cls, seed)
    net = sample_teacher(NetworkClass(cls.arch, 1.0, INF), seed)
    net = net.scaled(cls.c / coefficient_norm(net, cls.q))
    while coefficient_norm(net, cls.q) > cls.c:
        net = net.scaled(1 - 1e-15)
    return net


def min_preactivation_gap(net, X):
    """Smallest |pre-activation| of any hidden unit over the rows of X."""
    h, gap = np.asarray(X, dtype=np.float64), np.inf
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ W.T + b
        if i < net.depth - 1:
            gap = min(gap, float(np.abs(z).min()))
            h = np.maximum(z, 0)
    return gap


def kink_free_instance(arch, seed, n=16, margin=1e-4):
    """Random network (standard initialisation scale) and batch with every
    hidden pre-activation at least ``margin`` away from 0."""
    from unilearn.experiments import init_student
    from unilearn.nn import GradientBatch

    rng = np.random.default_rng(seed)
    while True:
        net = init_student(arch, rng)
        X = rng.random((n, arch[0]))
        if min_preactivation_gap(net, X) > margin:
            return net, GradientBatch(X, rng.uniform(-1, 1, (n, arch[-1])))


def _loss_ld(ws, bs, X, T):
    h = X
    for i, (W, b) in enumerate(zip(ws, bs)):
        h = h @ W.T + b
        if i < len(ws) - 1:
            h = np.maximum(h, np.longdouble(0))
    r = h - T
    return (r * r).sum() / np.longdouble(len(X))


def fd_gradient(net, batch, h=1e-6):
    """Central finite differences of the batch MSE, one parameter at a time.

    The loss is evaluated in long double so that rounding noise in the
    difference quotient stays far below the tolerances being tested.
    """
    ld = np.longdouble
    ws = [np.array(W, dtype=ld) for W in net.weights]
    bs = [np.array(b, dtype=ld) for b in net.biases]
    X, T, h = batch.inputs.astype(ld), batch.targets.astype(ld), ld(h)
    out = []
    for arr in ws + bs:
        G = np.zeros(arr.shape, dtype=ld)
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            fp = _loss_ld(ws, bs, X, T)
            arr[idx] = old - h
            fm = _loss_ld(ws, bs, X, T)
            arr[idx] = old
            G[idx] = (fp - fm) / (2 * h)
        out.append(G.astype(np.float64))
    L = len(ws)
    return out[:L], out[L:]


def max_rel_err(got, want):
    """Largest entrywise |a - b| / max(|a|, |b|); entries where both are 0 count as exact."""
    worst = 0.0
    for a, b in zip(got, want):
        diff = np.abs(a - b)
        scale = np.maximum(np.abs(a), np.abs(b))
        if np.any(diff[scale == 0] != 0):
            return np.inf
        nz = scale > 0
        if nz.any():
            worst = max(worst, float(np.max(diff[nz] / scale[nz])))
    return worst
