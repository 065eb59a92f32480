"""Hat functions: tents in each active coordinate, combined and clipped.

``lambda_eval`` is the one-dimensional tent of peak 1 at ``sigma`` and slope
``M`` (continued linearly below zero to the right of the peak).
``delta_eval`` sums the tents over the first ``s`` coordinates and subtracts
``s - 1``; ``hat_eval`` applies a ReLU and the signed amplitude.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .nn import INF, parse_exponent


@dataclass(frozen=True)
class HatSpec:
    d: int
    s: int
    M: float
    y: tuple
    nu: int = 1
    amplitude: float = 1.0

    def __post_init__(self):
        y = tuple(float(v) for v in np.atleast_1d(np.asarray(self.y, dtype=np.float64)))
        object.__setattr__(self, "y", y)
        if len(y) != self.d:
            raise ValueError(f"centre has {len(y)} coordinates, expected d={self.d}")
        if not 1 <= self.s <= self.d:
            raise ValueError(f"need 1 <= s <= d, got s={self.s}, d={self.d}")
        if not self.M >= 1:
            raise ValueError(f"need M >= 1, got {self.M}")
        if any(not 0.0 <= v <= 1.0 for v in y):
            raise ValueError("centre must lie in [0,1]^d")
        if self.nu not in (-1, 1):
            raise ValueError("nu must be +1 or -1")
        if not self.amplitude > 0:
            raise ValueError("amplitude must be positive")

    @property
    def centre(self) -> np.ndarray:
        return np.array(self.y)

    def support_box(self):
        """(lo, hi) of the closed box containing the support, active coordinates only."""
        c = self.centre[: self.s]
        return c - 1.0 / self.M, c + 1.0 / self.M

    def __call__(self, X) -> np.ndarray:
        return hat_eval_batch(self, X)

    def to_dict(self) -> dict:
        return {"d": self.d, "s": self.s, "M": self.M, "y": list(self.y), "nu": self.nu, "amplitude": self.amplitude}

    @classmethod
    def from_dict(cls, d: dict) -> "HatSpec":
        return cls(int(d["d"]), int(d["s"]), d["M"], d["y"], int(d.get("nu", 1)), float(d.get("amplitude", 1.0)))


def lambda_eval(M, sigma, t):
    if M < 1:
        raise ValueError(f"need M >= 1, got {M}")
    t = np.asarray(t, dtype=np.float64)
    out = np.where(t <= sigma - 1.0 / M, 0.0, 1.0 - M * np.abs(t - sigma))
    return float(out) if out.ndim == 0 else out


def delta_eval(spec: HatSpec, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.d,):
        raise ValueError(f"point of shape {x.shape} does not match d={spec.d}")
    total = sum(lambda_eval(spec.M, spec.y[i], x[i]) for i in range(spec.s))
    return float(total - (spec.s - 1))


def unit_hat(spec: HatSpec, X) -> np.ndarray:
    """The hat without sign and amplitude, at each row of X."""
    return kernels.hat_values(X, spec.y, spec.M, spec.s)


def hat_eval_batch(spec: HatSpec, X) -> np.ndarray:
    return (spec.nu * spec.amplitude) * unit_hat(spec, X)


def hat_eval(spec: HatSpec, x) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (spec.d,):
        raise ValueError(f"point of shape {x.shape} does not match d={spec.d}")
    return float(hat_eval_batch(spec, x[None, :])[0])


def hat_lp_bounds(s: int, M: float, p) -> tuple:
    """Closed-form lower and upper bounds on the L^p([0,1]^d) norm of the unit hat."""
    p = parse_exponent(p)
    if s < 1 or M < 1:
        raise ValueError("need s >= 1 and M >= 1")
    if not p > 0:
        raise ValueError("need p > 0")
    if p == INF:
        return 0.5, 1.0
    e = s / p
    return 0.5 * (4 * s) ** (-e) * M ** (-e), 2.0**e * M ** (-e)


def hat_lp_norm_numeric(spec: HatSpec, p, resolution: int) -> float:
    """Midpoint-rule L^p norm of the unit hat over [0,1]^d.

    ``resolution`` is the number of cells per unit length along each active
    axis; the grid covers the support box clipped to the unit cube. The hat
    does not depend on the inactive coordinates, whose cube has measure 1.
    """
    p = parse_exponent(p)
    if resolution < 8 * spec.M * spec.s:
        raise ValueError(f"resolution {resolution} < 8*M*s = {8 * spec.M * spec.s}; plateau not resolved")
    axes, widths = [], []
    for c in spec.y[: spec.s]:
        lo, hi = max(0.0, c - 1.0 / spec.M), min(1.0, c + 1.0 / spec.M)
        n = max(1, math.ceil((hi - lo) * resolution))
        if n % 2 == 0:
            n += 1  # odd count puts a midpoint on an unclipped centre
        h = (hi - lo) / n
        axes.append(lo + (np.arange(n) + 0.5) * h)
        widths.append(h)
    mesh = np.meshgrid(*axes, indexing="ij")
    X = np.zeros((mesh[0].size, spec.d))
    for j, g in enumerate(mesh):
        X[:, j] = g.ravel()
    vals = unit_hat(spec, X)
    if p == INF:
        return float(vals.max())
    cell = float(np.prod(widths))
    return float((np.sum(vals**p) * cell) ** (1.0 / p))
