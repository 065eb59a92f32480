"""Adaptive query methods, grid recovery, and the fooling-set attack.

A method sees the unknown function only through an :class:`Oracle`, which
records every query in order. Because methods are deterministic, a function
that agrees with ``u0`` at every point queried on ``u0`` produces exactly the
same transcript, and therefore the same predictor. The attack exploits this
by planting a hat in a cell that the method never looked at.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .hats import HatSpec, hat_lp_bounds, unit_hat
from .nn import INF, Mlp, format_exponent, parse_exponent


class BudgetExceeded(RuntimeError):
    pass


class BlindnessViolation(RuntimeError):
    pass


class AttackError(RuntimeError):
    pass


def iroot_floor(m: int, d: int) -> int:
    """Largest K with K**d <= m."""
    K = max(1, int(round(m ** (1.0 / d))))
    while K**d > m:
        K -= 1
    while (K + 1) ** d <= m:
        K += 1
    return K


def iroot_ceil(m: int, s: int) -> int:
    """Smallest k with k**s >= m."""
    k = max(1, int(round(m ** (1.0 / s))))
    while k**s < m:
        k += 1
    while k > 1 and (k - 1) ** s >= m:
        k -= 1
    return k


def as_function(u, d: int) -> Callable:
    """Wrap a network or a batch callable as ``X (n, d) -> values (n,)``."""
    if isinstance(u, Mlp):
        if u.d_in != d or u.arch[-1] != 1:
            raise ValueError(f"network arch {u.arch} does not map R^{d} to R")
        return u
    return u


def zero_function(X):
    return np.zeros(np.asarray(X).shape[0])


class Oracle:
    """Point-sample access to ``u`` with a hard budget and a full record."""

    def __init__(self, u: Callable, d: int, budget: int):
        self._u = u
        self.d = d
        self.budget = budget
        self._points: list = []
        self._values: list = []

    @property
    def used(self) -> int:
        return sum(len(p) for p in self._points)

    def _ask(self, X: np.ndarray) -> np.ndarray:
        if X.ndim != 2 or X.shape[1] != self.d:
            raise ValueError(f"queries must have shape (n, {self.d})")
        if self.used + len(X) > self.budget:
            raise BudgetExceeded(f"method requested {self.used + len(X)} samples, budget is {self.budget}")
        vals = np.asarray(self._u(X), dtype=np.float64).reshape(-1)
        self._points.append(X.copy())
        self._values.append(vals.copy())
        return vals

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=np.float64).reshape(1, self.d)
        return float(self._ask(x)[0])

    def query_many(self, X) -> np.ndarray:
        """Several non-adaptive queries, recorded in row order."""
        X = np.asarray(X, dtype=np.float64)
        return self._ask(X.reshape(1, -1) if X.ndim == 1 else X)

    def record(self):
        if not self._points:
            return np.zeros((0, self.d)), np.zeros(0)
        return np.vstack(self._points), np.concatenate(self._values)


class ZeroPredictor:
    def __init__(self, d: int):
        self.d = d

    def __call__(self, X):
        return np.zeros(np.asarray(X).reshape(-1, self.d).shape[0])


class GridPredictor:
    """Piecewise constant on the cells x_i + [0, 1/K)^d, top faces closed."""

    def __init__(self, K: int, values, d: int):
        self.K = K
        self.d = d
        self.values = np.asarray(values, dtype=np.float64)
        if self.values.shape != (K**d,):
            raise ValueError("need one value per lattice cell")

    def __call__(self, X):
        X = np.asarray(X, dtype=np.float64).reshape(-1, self.d)
        return self.values[kernels.grid_cells(X, self.K)]


class NetworkPredictor:
    """Network evaluated at ``x - shift``."""

    def __init__(self, net: Mlp, shift: float = 0.0):
        self.net = net
        self.shift = shift
        self.d = net.d_in

    def __call__(self, X):
        X = np.asarray(X, dtype=np.float64).reshape(-1, self.d)
        return self.net(X - self.shift)


class DeterministicMethod:
    """Base class: issue at most ``budget`` oracle queries, return a predictor."""

    name = "method"

    def __init__(self, d: int, budget: int):
        if budget < 0:
            raise ValueError("budget must be nonnegative")
        self.d = d
        self.budget = budget

    def run(self, oracle: Oracle):
        raise NotImplementedError


class ZeroMethod(DeterministicMethod):
    """Queries nothing and predicts 0."""

    name = "zero"

    def run(self, oracle):
        return ZeroPredictor(self.d)


def lattice(K: int, d: int) -> np.ndarray:
    """{0, 1/K, ..., (K-1)/K}^d in row-major order (first axis slowest)."""
    nodes = np.arange(K) / K
    return np.array(list(itertools.product(nodes, repeat=d)), dtype=np.float64).reshape(-1, d)


class GridRecoveryMethod(DeterministicMethod):
    name = "grid"

    def __init__(self, d: int, m: int, lipschitz: float = 1.0):
        super().__init__(d, m)
        self.K = iroot_floor(m, d)
        self.lipschitz = lipschitz

    @property
    def guaranteed_error(self) -> float:
        """Uniform error bound for every function with the given Lipschitz constant."""
        return self.lipschitz * 2.0 * math.sqrt(self.d) * self.budget ** (-1.0 / self.d)

    def run(self, oracle):
        vals = oracle.query_many(lattice(self.K, self.d))
        return GridPredictor(self.K, vals, self.d)


def grid_recovery_method(d: int, m: int, lipschitz: float = 1.0) -> GridRecoveryMethod:
    if m < 1:
        raise ValueError("m must be >= 1")
    return GridRecoveryMethod(d, m, lipschitz)


@dataclass
class QueryTranscript:
    points: np.ndarray
    values: np.ndarray
    predictor: object

    def __len__(self):
        return len(self.values)

    def same_as(self, other: "QueryTranscript", probe: Optional[np.ndarray] = None) -> bool:
        """Bit-level equality of queries, answers and (on ``probe``) predictions."""
        if self.points.shape != other.points.shape or self.values.shape != other.values.shape:
            return False
        if self.points.tobytes() != other.points.tobytes() or self.values.tobytes() != other.values.tobytes():
            return False
        if probe is not None:
            a = np.asarray(self.predictor(probe), dtype=np.float64)
            b = np.asarray(other.predictor(probe), dtype=np.float64)
            return a.tobytes() == b.tobytes()
        return True


def run_with_recording(method: DeterministicMethod, u: Callable) -> QueryTranscript:
    oracle = Oracle(as_function(u, method.d), method.d, method.budget)
    predictor = method.run(oracle)
    points, values = oracle.record()
    return QueryTranscript(points, values, predictor)


class FoolingFunction:
    """u0 + nu * amplitude * hat."""

    def __init__(self, u0: Callable, spec: HatSpec):
        self.u0 = u0
        self.spec = spec

    def __call__(self, X):
        X = np.asarray(X, dtype=np.float64).reshape(-1, self.spec.d)
        base = np.asarray(self.u0(X), dtype=np.float64).reshape(-1)
        return base + (self.spec.nu * self.spec.amplitude) * unit_hat(self.spec, X)


def _refine_max(h_fn, x0: np.ndarray, v0: float, h: float, tol: float = 1e-10):
    d = x0.size
    best_x, best_v = x0, v0
    ticks = np.linspace(-1.0, 1.0, 9)
    while h > tol:
        if d <= 3:
            offs = np.array(list(itertools.product(ticks, repeat=d))) * h
            cand = np.clip(best_x + offs, 0.0, 1.0)
            vals = h_fn(cand)
            i = int(np.argmax(vals))
            if vals[i] > best_v:
                best_x, best_v = cand[i], float(vals[i])
        else:
            for j in range(d):
                cand = np.repeat(best_x[None, :], ticks.size, axis=0)
                cand[:, j] = np.clip(cand[:, j] + ticks * h, 0.0, 1.0)
                vals = h_fn(cand)
                i = int(np.argmax(vals))
                if vals[i] > best_v:
                    best_x, best_v = cand[i], float(vals[i])
        h /= 4.0
    return best_x, best_v


def lp_error_estimate(f: Callable, g: Callable, p, n: int, seed: int, d: int, probe_points=None, refine: bool = True) -> float:
    """Monte Carlo estimate of ||f - g||_{L^p([0,1]^d)}.

    For p = inf the maximum over the samples (plus ``probe_points``) is
    sharpened by a zooming local search around the 10 largest values, since
    plain sampling misses spikes narrower than the sample spacing.
    """
    p = parse_exponent(p)
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    X = rng.random((n, d))

    def absdiff(Z):
        return np.abs(np.asarray(f(Z), dtype=np.float64).reshape(-1) - np.asarray(g(Z), dtype=np.float64).reshape(-1))

    if p != INF:
        e = absdiff(X)
        return float(np.mean(e**p) ** (1.0 / p))
    if probe_points is not None:
        X = np.vstack([X, np.asarray(probe_points, dtype=np.float64).reshape(-1, d)])
    e = absdiff(X)
    best = float(e.max())
    if not refine:
        return best
    h0 = n ** (-1.0 / d)
    for i in np.argsort(-e, kind="stable")[:10]:
        best = max(best, _refine_max(absdiff, X[i], float(e[i]), h0)[1])
    return best


@dataclass
class FoolingResult:
    chosen_ell: tuple
    chosen_nu: int
    fooling_function: dict
    u0: str
    k: int
    M: int
    untouched_count: int
    guaranteed_untouched: int
    n_queries: int
    measured_error: float
    theoretical_floor: float
    p: object
    errors_by_nu: dict = field(default_factory=dict)
    blind: bool = True
    k_doublings: int = 0
    method: str = ""

    def to_dict(self) -> dict:
        return {
            "chosen_ell": list(self.chosen_ell),
            "chosen_nu": self.chosen_nu,
            "fooling_function": self.fooling_function,
            "u0": self.u0,
            "k": self.k,
            "M": self.M,
            "untouched_count": self.untouched_count,
            "guaranteed_untouched": self.guaranteed_untouched,
            "n_queries": self.n_queries,
            "measured_error": self.measured_error,
            "theoretical_floor": self.theoretical_floor,
            "p": format_exponent(self.p),
            "errors_by_nu": {str(k): v for k, v in self.errors_by_nu.items()},
            "blind": self.blind,
            "k_doublings": self.k_doublings,
            "method": self.method,
        }


def fooling_centre(ell, k: int, d: int) -> np.ndarray:
    """Centre of the fooling cell with 1-based multi-index ``ell`` on the
    active coordinates; inactive coordinates are set to 0."""
    y = np.zeros(d)
    for j, l in enumerate(ell):
        y[j] = (2.0 * l - 1.0) / (8.0 * k)
    return y


def fooling_attack(
    method: DeterministicMethod,
    d: int,
    s: int,
    amplitude: float,
    u0: Callable | None = None,
    p=INF,
    n_mc: int = 20_000,
    seed: int = 0,
    u0_label: str = "zero",
) -> FoolingResult:
    """Plant a hat where ``method`` never looks and measure its error there."""
    p = parse_exponent(p)
    if not 1 <= s <= d:
        raise ValueError("need 1 <= s <= d")
    if not amplitude > 0:
        raise ValueError("amplitude must be positive")
    m = method.budget
    if m < 1:
        raise ValueError("method budget must be >= 1")
    u0 = zero_function if u0 is None else as_function(u0, d)

    base = run_with_recording(method, u0)
    n_q = len(base)
    k = iroot_ceil(m, s)
    doublings = 0
    while (4 * k) ** s <= m:
        k *= 2
        doublings += 1
    M = 8 * k
    touched = kernels.touched_cells(base.points, k, s)
    untouched = np.flatnonzero(~touched)
    guaranteed = (4 * k) ** s - n_q
    if len(untouched) < guaranteed:
        raise AttackError(f"only {len(untouched)} untouched cells, expected at least {guaranteed}")
    if len(untouched) == 0:
        raise AttackError("every fooling cell was queried")
    flat = int(untouched[0])
    ell = tuple(int(i) + 1 for i in np.unravel_index(flat, (4 * k,) * s))
    y = fooling_centre(ell, k, d)

    rng = np.random.default_rng(seed + 1)
    probe = np.vstack([y[None, :], rng.random((64, d))])
    errors = {}
    for nu in (1, -1):
        spec = HatSpec(d, s, M, y, nu, amplitude)
        fooled = run_with_recording(method, FoolingFunction(u0, spec))
        if not base.same_as(fooled, probe):
            raise BlindnessViolation(
                f"transcript on the fooling function (nu={nu}) differs from the one on u0: "
                "the method is not deterministic or the oracle is mis-wired"
            )
        errors[nu] = lp_error_estimate(FoolingFunction(u0, spec), base.predictor, p, n_mc, seed, d, probe_points=y[None, :])
    nu = 1 if errors[1] >= errors[-1] else -1
    return FoolingResult(
        chosen_ell=ell,
        chosen_nu=nu,
        fooling_function=HatSpec(d, s, M, y, nu, amplitude).to_dict(),
        u0=u0_label,
        k=k,
        M=M,
        untouched_count=int(len(untouched)),
        guaranteed_untouched=int(guaranteed),
        n_queries=n_q,
        measured_error=errors[nu],
        theoretical_floor=amplitude * hat_lp_bounds(s, M, p)[0],
        p=p,
        errors_by_nu=errors,
        blind=True,
        k_doublings=doublings,
        method=method.name,
    )
