"""Removal-of-drift transform.

    f(x)   = -2 * int_0^x b / sigma^2
    phi(x) = int_0^x exp(f)

so that b phi' + sigma^2 phi'' / 2 = 0 and phi(X) has no drift. Both
integrals are tabulated by adaptive Simpson on a grid that contains 0 and
every declared drift discontinuity as nodes.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .coefficients import SdeProblem
from .quadrature import adaptive_simpson

__all__ = [
    "TransformTables",
    "TransformRangeError",
    "NonIntegrableDriftError",
    "MartingaleReport",
    "c0_constant",
    "default_interval",
    "build_transform",
    "phi",
    "phi_prime",
    "phi_second",
    "phi_inverse",
    "f_quadrature",
    "martingale_diagnostic",
    "export_csv",
]

DEFAULT_QUAD_TOL = 1e-10
DEFAULT_SPACING = 1.0 / 64.0


class TransformRangeError(ValueError):
    """Query outside the tabulated working interval."""


class NonIntegrableDriftError(ValueError):
    """The transform needs an integrable drift."""


def c0_constant(k_sigma: float, l1_norm: float) -> float:
    """exp(2 K_sigma^2 ||b||_1): bound for phi' and 1/phi'."""
    return math.exp(2.0 * k_sigma * k_sigma * l1_norm)


def default_interval(problem: SdeProblem) -> tuple:
    """x0 +/- (||b||_inf T + 8 K_sigma sqrt(T)), widened to contain 0."""
    T = problem.horizon
    half = problem.drift.sup_bound * T + 8.0 * problem.diffusion.k_sigma * math.sqrt(T)
    lo, hi = problem.x0 - half, problem.x0 + half
    return min(lo, -half / 8.0), max(hi, half / 8.0)


@dataclass(frozen=True, eq=False)
class TransformTables:
    grid: np.ndarray
    f_values: np.ndarray
    phi_values: np.ndarray
    c0: float
    quad_tol: float
    problem: SdeProblem
    spline: CubicHermiteSpline
    max_error: float

    @property
    def x_lo(self) -> float:
        return float(self.grid[0])

    @property
    def x_hi(self) -> float:
        return float(self.grid[-1])

    @property
    def phi_lo(self) -> float:
        return float(self.phi_values[0])

    @property
    def phi_hi(self) -> float:
        return float(self.phi_values[-1])


def _integrand(problem):
    drift, diff = problem.drift, problem.diffusion

    def g(y):
        s = diff(y)
        return -2.0 * drift(y) / (s * s)

    return g


def _open(left, right):
    # keep Simpson nodes off the endpoints so a jump at a node is seen one-sidedly
    return np.nextafter(left, right), np.nextafter(right, left)


def _partial_f(g, starts, ys, tol):
    lo, _ = _open(starts, ys)
    vals, _ = adaptive_simpson(g, lo, ys, tol)
    return vals


def _make_grid(problem, x_lo, x_hi, spacing):
    cells = max(2, int(math.ceil((x_hi - x_lo) / spacing)))
    pts = np.linspace(x_lo, x_hi, cells + 1)
    extra = [0.0] + [p for p in problem.drift.breakpoints if x_lo < p < x_hi]
    pts = np.union1d(pts, np.asarray(extra, dtype=float))
    keep = np.concatenate([[True], np.diff(pts) > 1e-9 * max(1.0, spacing)])
    pts = pts[keep]
    # snap back exact special nodes removed by the dedup
    return np.union1d(pts, np.asarray(extra, dtype=float))


def _monotone_slopes(x, y, d):
    """Fritsch-Carlson limiting of Hermite slopes for monotone data."""
    d = d.copy()
    sec = np.diff(y) / np.diff(x)
    a = d[:-1] / sec
    b = d[1:] / sec
    r = a * a + b * b
    over = r > 9.0
    if np.any(over):
        tau = 3.0 / np.sqrt(r[over])
        idx = np.nonzero(over)[0]
        d[idx] = np.minimum(d[idx], tau * a[over] * sec[over])
        d[idx + 1] = np.minimum(d[idx + 1], tau * b[over] * sec[over])
    return d


def build_transform(problem: SdeProblem, x_lo: float | None = None, x_hi: float | None = None,
                    quad_tol: float = DEFAULT_QUAD_TOL,
                    spacing: float = DEFAULT_SPACING) -> TransformTables:
    """Tabulate f and phi on [x_lo, x_hi]; needs an integrable drift."""
    drift = problem.drift
    if not drift.integrable:
        raise NonIntegrableDriftError(
            "drift is not integrable; apply truncate_drift(drift, m) before building the transform")
    dlo, dhi = default_interval(problem)
    x_lo = dlo if x_lo is None else float(x_lo)
    x_hi = dhi if x_hi is None else float(x_hi)
    if not x_lo < 0.0 < x_hi:
        raise ValueError(f"need x_lo < 0 < x_hi, got [{x_lo}, {x_hi}]")

    grid = _make_grid(problem, x_lo, x_hi, spacing)
    g = _integrand(problem)
    left, right = grid[:-1], grid[1:]
    lo, hi = _open(left, right)

    df, err_f = adaptive_simpson(g, lo, hi, quad_tol)
    zero = int(np.searchsorted(grid, 0.0))
    f = np.empty_like(grid)
    f[zero] = 0.0
    f[zero + 1:] = np.cumsum(df[zero:])
    f[:zero] = -np.cumsum(df[:zero][::-1])[::-1]

    inner_tol = 1e-3 * quad_tol

    def expf(y):
        cell = np.clip(np.searchsorted(grid, y, side="right") - 1, 0, len(left) - 1)
        return np.exp(f[cell] + _partial_f(g, left[cell], y, inner_tol))

    dphi, err_phi = adaptive_simpson(expf, lo, hi, quad_tol)
    ph = np.empty_like(grid)
    ph[zero] = 0.0
    ph[zero + 1:] = np.cumsum(dphi[zero:])
    ph[:zero] = -np.cumsum(dphi[:zero][::-1])[::-1]

    slopes = _monotone_slopes(grid, ph, np.exp(f))
    spline = CubicHermiteSpline(grid, ph, slopes, extrapolate=False)
    c0 = c0_constant(problem.diffusion.k_sigma, drift.l1_norm)
    max_err = float(max(err_f.max(), err_phi.max()))
    return TransformTables(grid, f, ph, c0, quad_tol, problem, spline, max_err)


def _check_range(tables, x):
    xa = np.asarray(x, dtype=float)
    if np.any(xa < tables.x_lo) or np.any(xa > tables.x_hi) or np.any(np.isnan(xa)):
        raise TransformRangeError(
            f"x outside tabulated interval [{tables.x_lo:.6g}, {tables.x_hi:.6g}]")
    return xa


def _out(x, y):
    return float(y) if np.ndim(x) == 0 else y


def phi(tables: TransformTables, x):
    """Monotone cubic Hermite interpolation of the tabulated phi."""
    xa = _check_range(tables, x)
    return _out(x, tables.spline(xa))


def phi_prime(tables: TransformTables, x):
    """exp(f(x)) with f interpolated linearly between nodes."""
    xa = _check_range(tables, x)
    return _out(x, np.exp(np.interp(xa, tables.grid, tables.f_values)))


def phi_second(tables: TransformTables, x):
    """-2 b phi' / sigma^2, evaluated from the coefficients."""
    xa = _check_range(tables, x)
    p = tables.problem
    s = p.diffusion(xa)
    return _out(x, -2.0 * p.drift(xa) * np.exp(np.interp(xa, tables.grid, tables.f_values)) / (s * s))


def f_quadrature(tables: TransformTables, x):
    """f(x) by quadrature from the nearest node on the left (no interpolation)."""
    xa = _check_range(tables, x)
    flat = np.atleast_1d(xa).ravel()
    cell = np.clip(np.searchsorted(tables.grid, flat, side="right") - 1, 0, len(tables.grid) - 2)
    start = tables.grid[cell]
    g = _integrand(tables.problem)
    part = np.where(flat > start, _partial_f(g, start, flat, 1e-3 * tables.quad_tol), 0.0)
    out = (tables.f_values[cell] + part).reshape(np.shape(xa))
    return _out(x, out)


def phi_inverse(tables: TransformTables, z, max_iter: int = 100):
    """Inverse of the interpolated phi by bracketed Newton iteration.

    Guarantees |phi(phi_inverse(z)) - z| <= 10 * quad_tol.
    """
    za = np.asarray(z, dtype=float)
    if np.any(za < tables.phi_lo) or np.any(za > tables.phi_hi) or np.any(np.isnan(za)):
        raise TransformRangeError(
            f"z outside [{tables.phi_lo:.6g}, {tables.phi_hi:.6g}]")
    flat = np.atleast_1d(za).ravel()
    grid, pv = tables.grid, tables.phi_values
    cell = np.clip(np.searchsorted(pv, flat, side="right") - 1, 0, len(grid) - 2)
    lo = grid[cell].copy()
    hi = grid[cell + 1].copy()
    # secant start inside the cell
    w = (flat - pv[cell]) / (pv[cell + 1] - pv[cell])
    x = lo + w * (hi - lo)
    deriv = tables.spline.derivative()
    tol = 0.1 * tables.quad_tol
    for _ in range(max_iter):
        r = tables.spline(x) - flat
        done = (np.abs(r) <= tol) | (hi - lo <= 4e-16 * np.maximum(1.0, np.abs(x)))
        if np.all(done):
            break
        hi = np.where(r > 0.0, x, hi)
        lo = np.where(r < 0.0, x, lo)
        d = deriv(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = x - r / d
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi)
        x = np.where(done, x, np.where(bad, 0.5 * (lo + hi), step))
    return _out(z, x.reshape(np.shape(za)))


@dataclass
class MartingaleReport:
    n_fine: int
    paths: int
    mean: float
    std_error: float
    z_score: float
    phi_x0: float
    clamp_count: int

    def __str__(self):
        return (f"E[phi(X_T)] - phi(x0) = {self.mean:.3e} +/- {self.std_error:.3e} "
                f"(z = {self.z_score:+.2f}, n = {self.n_fine}, paths = {self.paths}, "
                f"clamped = {self.clamp_count})")


def martingale_diagnostic(problem: SdeProblem, tables: TransformTables, n_fine: int,
                          paths: int, seed: int, block_size: int = 4096,
                          workers: int | None = None) -> MartingaleReport:
    """Monte Carlo check that phi(X^(n)_T) has mean phi(x0).

    Terminal values outside the working interval are clamped to its ends and
    counted.
    """
    from .simulate import terminal_values

    xT = terminal_values(problem, n_fine, paths, seed, block_size=block_size, workers=workers)
    clamped = int(np.count_nonzero((xT < tables.x_lo) | (xT > tables.x_hi)))
    xT = np.clip(xT, tables.x_lo, tables.x_hi)
    p0 = phi(tables, problem.x0)
    d = tables.spline(xT) - p0
    mean = float(np.mean(d))
    se = float(np.std(d, ddof=1) / math.sqrt(paths))
    z = mean / se if se > 0.0 else (0.0 if mean == 0.0 else math.inf)
    return MartingaleReport(n_fine, paths, mean, se, z, p0, clamped)


def export_csv(tables: TransformTables, path) -> None:
    """Columns x, f, phi, phi_prime at the grid nodes."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "f", "phi", "phi_prime"])
        for x, fv, pv in zip(tables.grid, tables.f_values, tables.phi_values):
            w.writerow([repr(float(x)), repr(float(fv)), repr(float(pv)), repr(math.exp(fv))])
