"""Closed-form sampling-complexity quantities.

Every exponent equal to infinity is handled by its own branch. Sample counts
that can be astronomically large are reported as base-2 logarithms.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .nn import INF, NetworkClass, format_exponent, parse_exponent


_EPS = np.finfo(np.float64).eps


def _inv(p: float) -> float:
    return 0.0 if p == INF else 1.0 / p


def _expo(q: float) -> float:
    return 1.0 if q == INF else 1.0 - 2.0 / q


def omega_small_q(c: float, L: int, s: int, q) -> float:
    q = parse_exponent(q)
    return c**L * s ** _expo(q) / (4.0 * 3.0 ** (2.0 * _inv(q)))


def omega_big_q(c: float, L: int, B: int, q) -> float:
    q = parse_exponent(q)
    return c**L * (B ** _expo(q)) ** (L - 1) / 24.0


def omega_constant(c: float, L: int, B_or_d: int, s: int, q) -> float:
    """The constant scaling every lower bound; at q == 2 both branches apply
    and the larger one is returned."""
    q = parse_exponent(q)
    if L < 3 or not c > 0 or s < 1:
        raise ValueError("need L >= 3, c > 0, s >= 1")
    if q < 2:
        return omega_small_q(c, L, s, q)
    if q > 2:
        return omega_big_q(c, L, B_or_d, q)
    return max(omega_small_q(c, L, s, q), omega_big_q(c, L, B_or_d, q))


@dataclass
class BoundQuery:
    cls: NetworkClass
    m: int = 1
    p: float = INF
    s: int | None = None
    epsilon: float | None = None
    c0: float = 1.0

    def __post_init__(self):
        self.p = parse_exponent(self.p)
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if self.epsilon is not None and not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.p < 1:
            raise ValueError("p must lie in [1, inf]")

    @property
    def B(self) -> int:
        return self.cls.arch[1]

    @property
    def d(self) -> int:
        return self.cls.arch[0]

    def active(self) -> int:
        s = self.s if self.s is not None else min(self.B // 3, self.d)
        if not 1 <= s <= min(self.B // 3, self.d):
            raise ValueError(f"s={s} must satisfy 1 <= s <= min(floor(B/3), d) = {min(self.B // 3, self.d)}")
        return s


def lower_bound_error(query: BoundQuery) -> float:
    """c0 * Omega / (64 s)^(1 + s/p) * m^(-1/p - 1/s)."""
    s = query.active()
    cls = query.cls
    om = omega_constant(cls.c, cls.depth, query.B, s, cls.q)
    ip = _inv(query.p)
    return query.c0 * om * (64.0 * s) ** (-(1.0 + s * ip)) * float(query.m) ** (-ip - 1.0 / s)


def min_samples_log2(d: int, c: float, L: int, q, epsilon: float) -> float:
    """log2 of the least number of point samples that any method needs to
    reach uniform accuracy ``epsilon`` on the class of width 3d."""
    q = parse_exponent(q)
    om = omega_constant(c, L, 3 * d, d, q)
    return d * math.log2(om / (64.0 * d)) + d * math.log2(1.0 / epsilon)


def min_samples_for_uniform_accuracy(query: BoundQuery) -> float:
    cls = query.cls
    d = query.d
    if query.B != 3 * d:
        raise ValueError(f"needs hidden width B = 3d = {3 * d}, got {query.B}")
    if query.p != INF:
        raise ValueError("defined for p = inf only")
    if query.epsilon is None:
        raise ValueError("epsilon required")
    return min_samples_log2(d, cls.c, cls.depth, cls.q, query.epsilon)


def operator_norm_bound(n_rows: int, n_cols: int, q, entrywise_norm: float) -> float:
    """Bound on the l2 -> l2 operator norm from an entrywise l^q norm.

    The inequality is tight for rank-one matrices, where a float-computed
    entrywise norm can land a few ulps below the true operator norm. The
    result is therefore rounded outward by a relative margin proportional
    to the number of entries summed in the norm.
    """
    q = parse_exponent(q)
    if entrywise_norm < 0:
        raise ValueError("entrywise norm must be nonnegative")
    margin = 1.0 + 4.0 * (n_rows * n_cols + 2) * _EPS
    if q <= 2:
        return float(entrywise_norm) * margin
    return math.sqrt(n_rows * n_cols) ** _expo(q) * entrywise_norm * margin


def lipschitz_bound(cls: NetworkClass) -> float:
    """Bound on the l2 Lipschitz constant of every realization in ``cls``."""
    c, L, q = cls.c, cls.depth, cls.q
    if q <= 2:
        return c**L
    a = cls.arch
    inner = math.sqrt(a[0] * a[-1]) * math.prod(a[1:-1])
    return c**L * inner ** _expo(q)


def upper_bound_error(cls: NetworkClass, m: int) -> float:
    """Uniform error reached by grid sampling plus piecewise constant
    interpolation with ``m`` samples."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if cls.arch[-1] != 1:
        raise ValueError("output width must be 1")
    d, c, L, q = cls.arch[0], cls.c, cls.depth, cls.q
    base = 2.0 * math.sqrt(d) * c**L * float(m) ** (-1.0 / d)
    if q <= 2:
        return base
    return base * (math.sqrt(d) * math.prod(cls.arch[1:-1])) ** _expo(q)


def spectral_norm(W, iters: int = 500, seed: int = 0, tol: float = 1e-13) -> float:
    """Largest singular value by power iteration on W^T W (approaches from below)."""
    W = np.asarray(W, dtype=np.float64)
    if not np.any(W):
        return 0.0
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(W.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = W.T @ (W @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        v = w / nw
        new = float(np.linalg.norm(W @ v))
        if abs(new - est) <= tol * new:
            est = new
            break
        est = new
    return est


@dataclass
class BoundReport:
    omega: float
    lower_bound_error: float
    min_samples_log2: float | None
    upper_bound_error: float
    lipschitz_bound: float
    params: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


def report(query: BoundQuery) -> BoundReport:
    cls = query.cls
    s = query.active()
    notes = []
    if cls.q == 2:
        notes.append("q = 2: both Omega branches apply and disagree by a constant factor; the larger is used")
    log2m = None
    if query.epsilon is not None and query.p == INF and query.B == 3 * query.d:
        log2m = min_samples_for_uniform_accuracy(query)
        if log2m < 0:
            notes.append("minimum sample count is below 1: the lower bound is vacuous at this accuracy")
    elif query.epsilon is not None:
        notes.append("min_samples needs p = inf and B = 3d; not computed")
    return BoundReport(
        omega=omega_constant(cls.c, cls.depth, query.B, s, cls.q),
        lower_bound_error=lower_bound_error(query),
        min_samples_log2=log2m,
        upper_bound_error=upper_bound_error(cls, query.m),
        lipschitz_bound=lipschitz_bound(cls),
        params={
            "arch": list(cls.arch),
            "c": cls.c,
            "q": format_exponent(cls.q),
            "m": query.m,
            "p": format_exponent(query.p),
            "s": s,
            "epsilon": query.epsilon,
            "c0": query.c0,
        },
        notes=notes,
    )
