"""Strong-error estimates, empirical rate fits and the theoretical rate table."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ._stats import NORMS, ErrorEstimate, mean_and_se
from .coefficients import SdeProblem
from .simulate import DEFAULT_BLOCK, DEFAULT_CHUNK, coupled_errors

__all__ = [
    "NORMS",
    "ErrorEstimate",
    "RateFit",
    "RateDescriptor",
    "strong_errors",
    "strong_error",
    "gamma_sup_error",
    "gamma_prefactor",
    "fit_rate",
    "theoretical_rate",
    "estimates_to_csv",
]

CSV_COLUMNS = ("problem", "norm", "p", "n", "paths", "mean", "std_error", "seed")


def _check_norm(norm, p):
    if norm not in NORMS:
        raise ValueError(f"unknown norm {norm!r}; expected one of {NORMS}")
    if norm in ("Lp_sup", "gamma_sup") and p is None:
        raise ValueError(f"norm {norm} needs an exponent")
    if norm == "Lp_sup" and not p >= 1.0:
        raise ValueError(f"Lp_sup needs p >= 1, got {p}")


def _estimates_from(errs, norm, p, paths):
    out = []
    for i, n in enumerate(errs.levels):
        if norm == "L1_terminal":
            v = errs.terminal[i]
        elif norm == "L1_stopping":
            v = errs.stopping[i]
        elif norm == "L1_sup":
            v = errs.sup[i]
        else:
            v = errs.sup[i] ** p
        m, se = mean_and_se(v)
        m, se = float(m), float(se)
        if norm == "Lp_sup":
            root = m ** (1.0 / p)
            root_se = se / (p * m ** ((p - 1.0) / p)) if m > 0.0 else 0.0
            out.append(ErrorEstimate(n, norm, root, root_se, paths, p, m, se))
        elif norm == "gamma_sup":
            out.append(ErrorEstimate(n, norm, m, se, paths, p))
        else:
            out.append(ErrorEstimate(n, norm, m, se, paths))
    return out


def _reference(n_list, n_ref_factor):
    n_list = [int(n) for n in n_list]
    if not n_list:
        raise ValueError("n_list is empty")
    if int(n_ref_factor) != n_ref_factor or n_ref_factor < 1:
        raise ValueError("n_ref_factor must be a positive integer")
    n_ref = int(n_ref_factor) * max(n_list)
    for n in n_list:
        if n_ref % n:
            raise ValueError(f"n = {n} does not divide n_ref = {n_ref}")
    return n_list, n_ref


def strong_errors(problem: SdeProblem, norms: Sequence, n_list, n_ref_factor: int, paths: int,
                  seed: int, p: Optional[float] = None, gamma: Optional[float] = None,
                  stop_level: Optional[float] = None, block_size: int = DEFAULT_BLOCK,
                  chunk: int = DEFAULT_CHUNK, workers: Optional[int] = None) -> dict:
    """Estimates for several norms from one coupled simulation.

    Returns ``{norm: [ErrorEstimate per n]}``. The reference is the
    Euler-Maruyama path with ``n_ref_factor * max(n_list)`` steps on the same
    Brownian path.
    """
    for norm in norms:
        _check_norm(norm, gamma if norm == "gamma_sup" else p)
    if "gamma_sup" in norms and not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    n_list, n_ref = _reference(n_list, n_ref_factor)
    errs = coupled_errors(problem, n_list, n_ref, paths, seed, stop_level,
                          block_size=block_size, chunk=chunk, workers=workers)
    out = {}
    for norm in norms:
        expo = gamma if norm == "gamma_sup" else p
        out[norm] = _estimates_from(errs, norm, expo, paths)
    return out


def strong_error(problem: SdeProblem, norm: str, n_list, n_ref_factor: int, paths: int,
                 seed: int, p: Optional[float] = None, **kw) -> list:
    """One norm's estimates for each n in ``n_list``."""
    if norm == "gamma_sup":
        return strong_errors(problem, [norm], n_list, n_ref_factor, paths, seed, gamma=p, **kw)[norm]
    return strong_errors(problem, [norm], n_list, n_ref_factor, paths, seed, p=p, **kw)[norm]


def gamma_prefactor(gamma: float) -> float:
    """(2 - gamma) / (1 - gamma)."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must lie in (0, 1), got {gamma}")
    return (2.0 - gamma) / (1.0 - gamma)


def gamma_sup_error(problem: SdeProblem, gamma: float, n_list, n_ref_factor: int, paths: int,
                    seed: int, **kw) -> list:
    """Mean of sup|dX|^gamma; each estimate carries the bound shape
    prefactor * rate(n)^gamma with unit constant."""
    pref = gamma_prefactor(gamma)
    ests = strong_errors(problem, ["gamma_sup"], n_list, n_ref_factor, paths, seed,
                         gamma=gamma, **kw)["gamma_sup"]
    rate = theoretical_rate(problem.alpha, problem.beta, "L1_stopping",
                            l1_drift=problem.drift.integrable)
    out = []
    for e in ests:
        shape = pref * rate.decay(e.n) ** gamma
        out.append(ErrorEstimate(e.n, e.norm, e.mean, e.std_error, e.paths, gamma,
                                 bound_shape=shape))
    return out


# ---------------------------------------------------------------------------
# rate fits


@dataclass(frozen=True)
class RateFit:
    points: tuple
    slope: float
    intercept: float
    r_squared: float
    mode: str = "polynomial"


def fit_rate(estimates: Sequence[ErrorEstimate], mode: str = "polynomial") -> RateFit:
    """Weighted least squares of log(error) on -log(n) (or -log(log n)).

    Weights are (mean / SE)^2; if any SE is zero all points get equal
    weight. Error model: error ~ exp(intercept) * n^-slope.
    """
    if mode not in ("polynomial", "logarithmic"):
        raise ValueError(f"unknown mode {mode!r}")
    if len(estimates) < 3:
        raise ValueError("a rate fit needs at least 3 estimates")
    n = np.array([e.n for e in estimates], dtype=float)
    m = np.array([e.mean for e in estimates], dtype=float)
    se = np.array([e.std_error for e in estimates], dtype=float)
    if np.any(m <= 0.0):
        raise ValueError("non-positive mean error: exact scheme or broken coupling?")
    if mode == "logarithmic" and np.any(n <= 1.0):
        raise ValueError("logarithmic mode needs n > 1")
    x = -np.log(n) if mode == "polynomial" else -np.log(np.log(n))
    y = np.log(m)
    w = np.ones_like(m) if np.any(se <= 0.0) else (m / se) ** 2
    sw = w.sum()
    xb = (w * x).sum() / sw
    yb = (w * y).sum() / sw
    sxx = (w * (x - xb) ** 2).sum()
    if sxx == 0.0:
        raise ValueError("all step counts are equal")
    slope = (w * (x - xb) * (y - yb)).sum() / sxx
    intercept = yb - slope * xb
    resid = y - (intercept + slope * x)
    ss_res = (w * resid ** 2).sum()
    ss_tot = (w * (y - yb) ** 2).sum()
    r2 = 1.0 if ss_tot <= 1e-300 else 1.0 - ss_res / ss_tot
    pts = tuple((int(a), float(b)) for a, b in zip(n, m))
    return RateFit(pts, float(slope), float(intercept), float(r2), mode)


# ---------------------------------------------------------------------------
# theoretical rates


@dataclass(frozen=True)
class RateDescriptor:
    """Upper-bound decay: n^-exponent (polynomial) or (log n)^-exponent.

    ``subpolynomial`` flags an extra exp(C sqrt(log n)) factor (or its
    log-log analogue) that appears when the drift is not integrable.
    """

    mode: str
    exponent: float
    subpolynomial: bool = False
    note: str = ""

    def decay(self, n: float) -> float:
        if self.mode == "polynomial":
            return float(n) ** -self.exponent
        return math.log(n) ** -self.exponent


def theoretical_rate(alpha: float, beta: float, norm: str, p: Optional[float] = None,
                     l1_drift: bool = True, hoelder_only: bool = False) -> RateDescriptor:
    """Proven upper-bound rate for the given regularity and error norm.

    ``alpha``: diffusion Hölder offset in [0, 1/2]; ``beta``: drift Hölder
    exponent in (0, 1]. ``hoelder_only`` states that the drift has no
    class-A (discontinuous) part. For ``Lp_sup`` and ``gamma_sup`` the rate
    refers to the mean p-th (gamma-th) power of the sup error.
    """
    if not 0.0 <= alpha <= 0.5:
        raise ValueError(f"alpha must lie in [0, 1/2], got {alpha}")
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    _check_norm(norm, p)
    sub = not l1_drift
    log_mode = alpha == 0.0
    base = min(beta / 2.0, alpha)

    if norm in ("L1_terminal", "L1_stopping"):
        if log_mode:
            return RateDescriptor("logarithmic", 1.0, sub, "stopping-time L1, alpha = 0")
        return RateDescriptor("polynomial", base, sub, "stopping-time L1")

    if norm == "gamma_sup":
        g = p
        if not 0.0 < g < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {g}")
        if log_mode:
            return RateDescriptor("logarithmic", g, sub, "gamma-moment of sup, alpha = 0")
        return RateDescriptor("polynomial", g * base, sub, "gamma-moment of sup")

    if norm == "L1_sup":
        if hoelder_only and alpha == 0.5 and l1_drift:
            return RateDescriptor("polynomial", beta / 2.0, False, "Hölder drift, Lipschitz sigma")
        if log_mode:
            return RateDescriptor("logarithmic", 0.5, sub, "L1 sup, alpha = 0")
        return RateDescriptor("polynomial", alpha * min(beta, 2.0 * alpha), sub, "L1 sup")

    # Lp_sup
    if not l1_drift:
        raise ValueError("no Lp sup bound is available without an integrable drift")
    if hoelder_only and alpha == 0.5:
        return RateDescriptor("polynomial", p * beta / 2.0, False, "Hölder drift, Lipschitz sigma")
    if p < 2.0:
        raise ValueError("Lp sup bounds with a class-A drift part need p >= 2")
    if log_mode:
        return RateDescriptor("logarithmic", 1.0, False, "Lp sup, alpha = 0")
    if alpha < 0.5:
        return RateDescriptor("polynomial", base, False, "Lp sup, alpha < 1/2")
    return RateDescriptor("polynomial", min(0.5, p * beta / 2.0), False, "Lp sup, Lipschitz sigma")


# ---------------------------------------------------------------------------
# CSV


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def estimates_to_csv(rows: Sequence[tuple], fits: Sequence[dict] = ()) -> str:
    """Render ``(problem, seed, ErrorEstimate)`` rows plus a rate-fit trailer.

    The trailer starts with a ``# rate_fit`` line followed by its own
    header; every float is written with ``repr`` so output is byte-stable.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for problem, seed, e in rows:
        w.writerow([problem, e.norm, _fmt(e.p), e.n, e.paths, _fmt(e.mean), _fmt(e.std_error), seed])
    if fits:
        buf.write("# rate_fit\n")
        keys = list(fits[0].keys())
        w.writerow(keys)
        for f in fits:
            w.writerow([_fmt(f[k]) for k in keys])
    return buf.getvalue()
