"""Explicit ReLU networks realizing a signed, scaled hat function.

Two constructions over the architecture (d, B, ..., B, 1) of depth L >= 3:

* ``construct_big_q`` (q >= 2) replicates the tent-building block
  ``r = B // (3s)`` times in the first layer and spreads mass over all B
  units in every later layer, so the realized amplitude grows like
  ``B**(1 - 2/q)`` per layer.
* ``construct_small_q`` (q <= 2) uses a single block and routes the signal
  through one unit per layer.

Both rely on ``relu(t/2 + (1/M - y)/2) - relu(t - y) == tent(t) / (2M)``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .hats import HatSpec, unit_hat
from .nn import INF, Mlp, NetworkClass, entrywise_norm, forward_batch


class ConstructionError(ValueError):
    pass


def _root(x: float, q: float) -> float:
    """x ** (1/q), with the q = inf case explicit."""
    return 1.0 if q == INF else float(x) ** (1.0 / q)


def _expo(q: float) -> float:
    """1 - 2/q."""
    return 1.0 if q == INF else 1.0 - 2.0 / q


def _fit(a: np.ndarray, c: float, q: float) -> np.ndarray:
    # step entries toward zero by single ulps until the rounded norm is <= c
    while entrywise_norm(a, q) > c:
        a = np.nextafter(a, 0.0)
    return a


@dataclass(frozen=True)
class ConstructionPlan:
    cls: NetworkClass
    spec: HatSpec
    branch: str
    r: int
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    lambda_value: float

    @property
    def amplitude(self) -> float:
        """Prefactor of the unit hat in the realization (before the sign)."""
        return self.lambda_value / (self.spec.M * self.spec.s)


def _check(cls: NetworkClass, spec: HatSpec, branch: str):
    arch = cls.arch
    L = cls.depth
    if L < 3:
        raise ConstructionError(f"depth L={L} violates L >= 3")
    d, B = arch[0], arch[1]
    expected = (d,) + (B,) * (L - 1) + (1,)
    if arch != expected:
        raise ConstructionError(f"architecture {arch} is not of the form (d, B, ..., B, 1)")
    if B < 3:
        raise ConstructionError(f"width B={B} violates B >= 3")
    if spec.d != d:
        raise ConstructionError(f"hat dimension {spec.d} != input width d={d}")
    if 3 * spec.s > B:
        raise ConstructionError(f"s={spec.s} violates s <= B/3 = {B / 3:g}")
    if spec.s > d:
        raise ConstructionError(f"s={spec.s} violates s <= d = {d}")
    if float(spec.M) != int(spec.M) or spec.M < 1:
        raise ConstructionError(f"M={spec.M} violates M in N")
    if branch == "big" and not cls.q >= 2:
        raise ConstructionError(f"q={cls.q} violates q >= 2")
    if branch == "small" and not cls.q <= 2:
        raise ConstructionError(f"q={cls.q} violates q <= 2")


def plan(cls: NetworkClass, spec: HatSpec, branch: str | None = None) -> ConstructionPlan:
    if branch is None:
        branch = "big" if cls.q >= 2 else "small"
    _check(cls, spec, branch)
    c, q, L, B, s, M = cls.c, cls.q, cls.depth, cls.arch[1], spec.s, float(spec.M)
    y = spec.centre[:s]
    alpha = (1.0 / M - y) / 2.0
    beta = -y
    gamma = np.full(s, (s - 1) / s / (2.0 * M))
    if branch == "big":
        r = B // (3 * s)
        e = _expo(q)
        lam = c**L * (B**e) ** (L - 2) * (3 * r * s) ** e / 6.0
    else:
        r = 1
        lam = c**L * s ** _expo(q) / (2.0 * _root(3.0, q) ** 2)
    return ConstructionPlan(cls, spec, branch, r, alpha, beta, gamma, lam)


def _first_layer(p: ConstructionPlan, blocks: int, scale: float):
    d, B, s = p.cls.arch[0], p.cls.arch[1], p.spec.s
    W = np.zeros((B, d))
    b = np.zeros(B)
    for blk in range(blocks):
        o = 3 * s * blk
        for j in range(s):
            W[o + j, j] = 0.5
            W[o + s + j, j] = 1.0
        b[o : o + s] = p.alpha
        b[o + s : o + 2 * s] = p.beta
        b[o + 2 * s : o + 3 * s] = p.gamma
    return W * scale, b * scale


def construct_big_q(cls: NetworkClass, spec: HatSpec):
    """Network for q >= 2; returns ``(net, lambda_value)`` with
    ``net(x) == nu * lambda_value / (M s) * hat(x)``."""
    p = plan(cls, spec, "big")
    c, q, L, B, s, r = cls.c, cls.q, cls.depth, cls.arch[1], spec.s, p.r
    W1, b1 = _first_layer(p, r, c / _root(3 * s * r, q))
    row = np.zeros(B)
    for blk in range(r):
        o = 3 * s * blk
        row[o : o + s] = 1.0
        row[o + s : o + 3 * s] = -1.0
    W2 = np.tile(row, (B, 1)) * (c / _root(3 * s * r * B, q))
    weights = [W1, W2]
    biases = [b1, np.zeros(B)]
    for _ in range(3, L):
        weights.append(np.full((B, B), c / _root(B, q) ** 2))
        biases.append(np.zeros(B))
    weights.append(np.full((1, B), spec.nu * c / _root(B, q)))
    biases.append(np.zeros(1))
    return _assemble(p, weights, biases), p.lambda_value


def construct_small_q(cls: NetworkClass, spec: HatSpec):
    """Network for q <= 2; returns ``(net, amplitude_numerator)`` with
    ``net(x) == nu * amplitude_numerator / (M s) * hat(x)``."""
    p = plan(cls, spec, "small")
    c, q, L, B, s = cls.c, cls.q, cls.depth, cls.arch[1], spec.s
    scale = c / _root(3 * s, q)
    W1, b1 = _first_layer(p, 1, scale)
    W2 = np.zeros((B, B))
    W2[0, :s] = 1.0
    W2[0, s : 3 * s] = -1.0
    weights = [W1, W2 * scale]
    biases = [b1, np.zeros(B)]
    for _ in range(3, L):
        Wi = np.zeros((B, B))
        Wi[0, 0] = c
        weights.append(Wi)
        biases.append(np.zeros(B))
    WL = np.zeros((1, B))
    WL[0, 0] = spec.nu * c
    weights.append(WL)
    biases.append(np.zeros(1))
    return _assemble(p, weights, biases), p.lambda_value


def _assemble(p: ConstructionPlan, weights, biases) -> Mlp:
    c, q = p.cls.c, p.cls.q
    weights = [_fit(W, c, q) for W in weights]
    biases = [_fit(b, c, q) for b in biases]
    meta = {
        "construction": p.branch,
        "class": {"arch": list(p.cls.arch), "c": c, "q": "inf" if q == INF else q},
        "hat": p.spec.to_dict() | {"amplitude": p.amplitude},
        "lambda_value": p.lambda_value,
    }
    return Mlp(p.cls.arch, weights, biases, meta=meta)


def construct(cls: NetworkClass, spec: HatSpec):
    """Dispatch on q; q == 2 uses the big-q network.

    Returns ``(net, plan)``.
    """
    branch = "big" if cls.q >= 2 else "small"
    p = plan(cls, spec, branch)
    net = (construct_big_q if branch == "big" else construct_small_q)(cls, spec)[0]
    return net, p


def structured_points(spec: HatSpec) -> np.ndarray:
    """Centre, support-box corners, splice points and plateau corners."""
    y = spec.centre
    s, M = spec.s, float(spec.M)
    pts = [y.copy()]
    for signs in itertools.product((-1.0, 1.0), repeat=s):
        sg = np.array(signs)
        for off in (1.0 / M, 1.0 / (2.0 * M * s)):
            x = y.copy()
            x[:s] += sg * off
            pts.append(x)
    for i in range(s):
        for sg in (-1.0, 1.0):
            x = y.copy()
            x[i] += sg / M
            pts.append(x)
    return np.array(pts)


def verify_construction(net: Mlp, spec: HatSpec, expected_amplitude: float, n_points: int = 10_000, seed: int = 0) -> float:
    """Largest |net(x) - nu * expected_amplitude * hat(x)| over seeded
    uniform points in [0,1]^d and the structured points of the hat."""
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.random((n_points, spec.d)), structured_points(spec)])
    got = forward_batch(net, X)[:, 0]
    want = (spec.nu * expected_amplitude) * unit_hat(spec, X)
    return float(np.max(np.abs(got - want)))
