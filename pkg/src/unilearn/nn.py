"""Dense feed-forward ReLU networks.

A network is a list of ``(W, b)`` pairs; every layer but the last is
followed by a componentwise ReLU. All arithmetic is float64.

JSON layout (``to_json`` / ``from_json``)::

    {"arch": [N0, ..., NL],
     "weights": [W1, ..., WL],   # Wi as a list of Ni rows, each of length N(i-1)
     "biases": [b1, ..., bL]}    # bi as a flat list of length Ni

Matrices are stored row-major: ``weights[i][r][c]`` is the entry of
``W^{i+1}`` in row ``r``, column ``c``. A flat row-major list of length
``Ni * N(i-1)`` is also accepted on input. An optional ``"meta"`` object is
carried through untouched.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

INF = math.inf


def parse_exponent(q) -> float:
    """Parse a norm exponent; ``"inf"``/``"∞"`` and ``math.inf`` map to ``INF``."""
    if isinstance(q, str):
        if q.strip().lower() in ("inf", "infinity", "∞"):
            return INF
        q = float(q)
    q = float(q)
    if math.isnan(q):
        raise ValueError("exponent is NaN")
    return INF if math.isinf(q) else q


def format_exponent(q):
    """JSON-friendly exponent: "inf", an int when integral, else the float."""
    if q == INF:
        return "inf"
    return int(q) if float(q).is_integer() else q


def entrywise_norm(a, q) -> float:
    """Entrywise l^q norm of an array (any shape)."""
    a = np.abs(np.asarray(a, dtype=np.float64)).ravel()
    if a.size == 0:
        return 0.0
    if q == INF:
        return float(a.max())
    if q < 1:
        raise ValueError(f"q must lie in [1, inf], got {q}")
    if q == 1:
        return float(a.sum())
    if q == 2:
        return float(math.sqrt(np.dot(a, a)))
    return float(np.sum(a**q) ** (1.0 / q))


@dataclass(frozen=True)
class Mlp:
    arch: tuple
    weights: tuple
    biases: tuple
    meta: Optional[dict] = field(default=None, compare=False)

    def __post_init__(self):
        arch = tuple(int(n) for n in self.arch)
        if len(arch) < 2:
            raise ValueError("architecture needs at least input and output widths (L >= 1)")
        if any(n < 1 for n in arch):
            raise ValueError(f"layer widths must be positive, got {arch}")
        L = len(arch) - 1
        if len(self.weights) != L or len(self.biases) != L:
            raise ValueError(f"expected {L} weight matrices and bias vectors")
        ws, bs = [], []
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            W = np.array(W, dtype=np.float64)
            b = np.array(b, dtype=np.float64).reshape(-1)
            if W.shape != (arch[i + 1], arch[i]):
                raise ValueError(f"layer {i + 1}: weight shape {W.shape} != {(arch[i + 1], arch[i])}")
            if b.shape != (arch[i + 1],):
                raise ValueError(f"layer {i + 1}: bias shape {b.shape} != {(arch[i + 1],)}")
            W.setflags(write=False)
            b.setflags(write=False)
            ws.append(W)
            bs.append(b)
        object.__setattr__(self, "arch", arch)
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "biases", tuple(bs))

    @property
    def depth(self) -> int:
        return len(self.arch) - 1

    @property
    def d_in(self) -> int:
        return self.arch[0]

    @classmethod
    def zeros(cls, arch: Sequence[int]) -> "Mlp":
        arch = [int(n) for n in arch]
        return cls(
            arch,
            [np.zeros((arch[i + 1], arch[i])) for i in range(len(arch) - 1)],
            [np.zeros(arch[i + 1]) for i in range(len(arch) - 1)],
        )

    def scaled(self, t: float) -> "Mlp":
        return Mlp(self.arch, [t * W for W in self.weights], [t * b for b in self.biases])

    def __call__(self, X):
        """Evaluate a scalar-output network on a batch, returning shape (n,)."""
        out = forward_batch(self, X)
        return out[:, 0] if self.arch[-1] == 1 else out

    def to_dict(self) -> dict:
        d = {
            "arch": list(self.arch),
            "weights": [W.tolist() for W in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }
        if self.meta is not None:
            d["meta"] = self.meta
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "Mlp":
        arch = [int(n) for n in d["arch"]]
        weights = []
        for i, W in enumerate(d["weights"]):
            W = np.asarray(W, dtype=np.float64)
            if W.ndim == 1:
                W = W.reshape(arch[i + 1], arch[i])
            weights.append(W)
        return cls(arch, weights, d["biases"], meta=d.get("meta"))

    @classmethod
    def from_json(cls, text: str) -> "Mlp":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class NetworkClass:
    """Descriptor of the set of realizations with architecture ``arch`` and
    coefficient norm ``||Phi||_q <= c``."""

    arch: tuple
    c: float
    q: float

    def __post_init__(self):
        object.__setattr__(self, "arch", tuple(int(n) for n in self.arch))
        object.__setattr__(self, "q", parse_exponent(self.q))
        object.__setattr__(self, "c", float(self.c))
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        if not self.q >= 1:
            raise ValueError(f"q must be >= 1, got {self.q}")
        if len(self.arch) < 2:
            raise ValueError("architecture needs L >= 1")

    @property
    def depth(self) -> int:
        return len(self.arch) - 1

    @property
    def d(self) -> int:
        return self.arch[0]

    @classmethod
    def uniform(cls, d: int, B: int, L: int, c: float, q) -> "NetworkClass":
        """The class with architecture (d, B, ..., B, 1), B repeated L-1 times."""
        return cls((d,) + (B,) * (L - 1) + (1,), c, q)


@dataclass
class GradientBatch:
    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        t = np.asarray(self.targets, dtype=np.float64)
        self.targets = t.reshape(len(t), -1) if t.ndim <= 1 else t
        if len(self.inputs) < 1 or len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets must have equal nonzero length")


@dataclass(frozen=True)
class Gradients:
    """Partial derivatives, one array per parameter array of the network."""

    weights: tuple
    biases: tuple

    def max_abs(self) -> float:
        return max(float(np.abs(a).max()) for a in self.weights + self.biases)


def relu(x):
    return np.maximum(x, 0.0)


def forward(net: Mlp, x) -> np.ndarray:
    """Realization of ``net`` at a single point ``x``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.d_in,):
        raise ValueError(f"input of shape {x.shape} does not match N0={net.d_in}")
    return forward_batch(net, x[None, :])[0]


def forward_batch(net: Mlp, X) -> np.ndarray:
    """Realization at each row of ``X``; returns shape (n, NL)."""
    h = np.asarray(X, dtype=np.float64)
    if h.ndim == 1:
        h = h.reshape(-1, net.d_in)
    if h.shape[1] != net.d_in:
        raise ValueError(f"input width {h.shape[1]} does not match N0={net.d_in}")
    last = net.depth - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ W.T + b
        if i < last:
            h = relu(h)
    return h


def coefficient_norm(net: Mlp, q) -> float:
    """max over layers of max(||W^i||_q, ||b^i||_q), entrywise."""
    q = parse_exponent(q)
    if q < 1:
        raise ValueError(f"q must lie in [1, inf], got {q}")
    return max(max(entrywise_norm(W, q), entrywise_norm(b, q)) for W, b in zip(net.weights, net.biases))


def in_class(net: Mlp, cls: NetworkClass, slack: float = 0.0) -> bool:
    if tuple(net.arch) != tuple(cls.arch):
        return False
    return coefficient_norm(net, cls.q) <= cls.c + slack


def _forward_cache(weights, biases, X):
    pre, post = [], [X]
    h = X
    last = len(weights) - 1
    for i, (W, b) in enumerate(zip(weights, biases)):
        z = h @ W.T + b
        pre.append(z)
        h = relu(z) if i < last else z
        post.append(h)
    return pre, post


def mse_and_grad_arrays(weights, biases, X, T):
    """Mean over the batch of the squared output error, and its gradient,
    for parameters given as plain lists of arrays."""
    pre, post = _forward_cache(weights, biases, X)
    n = X.shape[0]
    resid = post[-1] - T
    loss = float(np.sum(resid * resid) / n)
    delta = (2.0 / n) * resid
    L = len(weights)
    gW: List[np.ndarray] = [None] * L  # type: ignore[list-item]
    gb: List[np.ndarray] = [None] * L  # type: ignore[list-item]
    for i in range(L - 1, -1, -1):
        gW[i] = delta.T @ post[i]
        gb[i] = delta.sum(axis=0)
        if i > 0:
            # relu'(0) := 0
            delta = (delta @ weights[i]) * (pre[i - 1] > 0.0)
    return loss, gW, gb


def mse_and_grad(net: Mlp, X, T):
    loss, gW, gb = mse_and_grad_arrays(net.weights, net.biases, X, T)
    return loss, Gradients(tuple(gW), tuple(gb))


def backprop_grad(net: Mlp, batch: GradientBatch) -> Gradients:
    if batch.targets.shape[1] != net.arch[-1]:
        raise ValueError("target width does not match the output layer")
    return mse_and_grad(net, batch.inputs, batch.targets)[1]


def mse(net: Mlp, batch: GradientBatch) -> float:
    r = forward_batch(net, batch.inputs) - batch.targets
    return float(np.sum(r * r) / len(r))


def lipschitz_lower_estimate(net: Mlp, n_pairs: int, seed: int) -> float:
    """Largest l2 difference quotient over ``n_pairs`` seeded random pairs in [0,1]^N0."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.random((n_pairs, net.d_in))
    Y = rng.random((n_pairs, net.d_in))
    num = np.linalg.norm(forward_batch(net, X) - forward_batch(net, Y), axis=1)
    den = np.linalg.norm(X - Y, axis=1)
    ok = den > 0
    if not ok.any():
        return 0.0
    return float(np.max(num[ok] / den[ok]))


def random_mlp(arch, rng, scale=1.0) -> Mlp:
    """Gaussian coefficients; handy for tests and benchmarks."""
    arch = [int(n) for n in arch]
    return Mlp(
        arch,
        [scale * rng.standard_normal((arch[i + 1], arch[i])) for i in range(len(arch) - 1)],
        [scale * rng.standard_normal(arch[i + 1]) for i in range(len(arch) - 1)],
    )
