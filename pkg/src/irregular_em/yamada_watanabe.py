"""Yamada-Watanabe approximations of |x|.

For delta > 1 and 0 < eps < 1 the density

    psi(z) = 2 / (z log delta) * sin^2(pi * log(z delta / eps) / log delta)

lives on [eps/delta, eps], integrates to one and touches the ceiling
2 / (z log delta) at the log-midpoint. In the log coordinate
u = log(z delta / eps) / log delta its antiderivative is u - sin(2 pi u)/(2 pi),
and the second antiderivative also has a closed form, so phi, phi' and phi''
are evaluated exactly rather than by tabulated quadrature.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "YwParams",
    "psi",
    "psi_antiderivative",
    "yw_phi",
    "yw_phi_prime",
    "yw_phi_second",
    "schedule",
    "dump_csv",
]


@dataclass(frozen=True)
class YwParams:
    delta: float
    epsilon: float

    def __post_init__(self):
        if not self.delta > 1.0:
            raise ValueError(f"delta must exceed 1, got {self.delta}")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")

    @property
    def lower(self) -> float:
        return self.epsilon / self.delta

    @property
    def log_delta(self) -> float:
        return math.log(self.delta)


def _out(x, y):
    return float(y) if np.ndim(x) == 0 else y


def _logpos(params, r):
    # position inside the support in log coordinates, clipped to [0, 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.log(np.maximum(r, params.lower) / params.lower) / params.log_delta
    return np.clip(u, 0.0, 1.0)


def psi(params: YwParams, z):
    """Density supported on [eps/delta, eps]; zero elsewhere."""
    za = np.asarray(z, dtype=float)
    inside = (za > params.lower) & (za < params.epsilon)
    u = _logpos(params, za)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 2.0 / (za * params.log_delta) * np.sin(np.pi * u) ** 2
    return _out(z, np.where(inside, val, 0.0))


def psi_antiderivative(params: YwParams, y):
    """Integral of psi from 0 to y (0 below the support, 1 above)."""
    ya = np.asarray(y, dtype=float)
    u = _logpos(params, ya)
    val = u - np.sin(2.0 * np.pi * u) / (2.0 * np.pi)
    val = np.where(ya >= params.epsilon, 1.0, np.where(ya <= params.lower, 0.0, val))
    return _out(y, val)


def _phi_abs(params: YwParams, r):
    a, eps, lg = params.lower, params.epsilon, params.log_delta
    two_pi = 2.0 * np.pi
    k = lg / (lg * lg + two_pi * two_pi) / two_pi

    def band(s):
        u = _logpos(params, s)
        with np.errstate(divide="ignore", invalid="ignore"):
            lin = (s * np.log(np.maximum(s, a) / a) - s + a) / lg
        osc = k * (s * (lg * np.sin(two_pi * u) - two_pi * np.cos(two_pi * u)) + two_pi * a)
        return lin - osc

    top = band(np.asarray(eps))
    r = np.asarray(r, dtype=float)
    return np.where(r <= a, 0.0, np.where(r >= eps, top + (r - eps), band(np.minimum(r, eps))))


def yw_phi(params: YwParams, x):
    """Even C2 function with phi(0) = 0 and |x| <= eps + phi(x)."""
    xa = np.asarray(x, dtype=float)
    return _out(x, _phi_abs(params, np.abs(xa)))


def yw_phi_prime(params: YwParams, x):
    xa = np.asarray(x, dtype=float)
    return _out(x, np.sign(xa) * psi_antiderivative(params, np.abs(xa)))


def yw_phi_second(params: YwParams, x):
    xa = np.asarray(x, dtype=float)
    return _out(x, psi(params, np.abs(xa)))


def schedule(alpha: float, n: int) -> YwParams:
    """(delta, eps) used for step count n: (2, n^-1/2) if alpha > 0,
    (n^(1/3), 1/log n) if alpha = 0."""
    if not 0.0 <= alpha <= 0.5:
        raise ValueError(f"alpha must lie in [0, 1/2], got {alpha}")
    if n < 3:
        raise ValueError(f"n must be >= 3 so that 1/log n < 1, got {n}")
    if alpha > 0.0:
        return YwParams(2.0, n ** -0.5)
    return YwParams(n ** (1.0 / 3.0), 1.0 / math.log(n))


def dump_csv(params: YwParams, xs, path) -> None:
    """Write columns x, phi, phi', phi'' for inspection."""
    xs = np.asarray(xs, dtype=float)
    rows = zip(xs, yw_phi(params, xs), yw_phi_prime(params, xs), yw_phi_second(params, xs))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "phi", "phi_prime", "phi_second"])
        for row in rows:
            w.writerow([repr(float(v)) for v in row])
