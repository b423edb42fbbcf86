"""Drift and diffusion coefficients, their regularity metadata, and a gallery
of canonical test problems.

Coefficient callables are vectorised: they take a float or an ndarray and
return the same shape. Every coefficient object is frozen after construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .quadrature import integrate

__all__ = [
    "HoelderFn",
    "ClassAFn",
    "DriftSpec",
    "DiffusionSpec",
    "SdeProblem",
    "CheckResult",
    "RegularityReport",
    "GALLERY",
    "monotone",
    "constant",
    "indicator_ge",
    "indicator_gt",
    "indicator_le",
    "indicator_lt",
    "sign",
    "smoothstep",
    "cutoff",
    "cutoff_derivative",
    "eval_drift",
    "verify_regularity",
    "truncate_drift",
    "gallery_problem",
]

Func = Callable[[np.ndarray], np.ndarray]


def _as_output(x, y):
    if np.ndim(x) == 0:
        return float(y)
    return y


# ---------------------------------------------------------------------------
# Hölder part


@dataclass(frozen=True)
class HoelderFn:
    """Bounded ``beta``-Hölder function with declared norm (sup + seminorm)."""

    evaluate: Func
    beta: float
    hoelder_norm: float

    def __post_init__(self):
        if not 0.0 < self.beta <= 1.0:
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if not self.hoelder_norm >= 0.0:
            raise ValueError("hoelder_norm must be non-negative")

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        return _as_output(x, np.asarray(self.evaluate(xa), dtype=float))


# ---------------------------------------------------------------------------
# Class-A part, built constructively from bounded monotone pieces


@dataclass(frozen=True)
class MonotonePiece:
    """Bounded monotone primitive. ``jumps`` lists its discontinuities."""

    func: Func
    bound: float
    increasing: bool
    jumps: tuple = ()
    name: str = "piece"


@dataclass(frozen=True)
class ClassAFn:
    """Element of the drift class built from monotone pieces.

    ``combiner`` is an expression tree over piece indices::

        ("piece", i)
        ("sum", ((w0, node0), (w1, node1), ...))
        ("prod", (node0, node1, ...))

    Only sums, scalar multiples and products appear, the operations under
    which the class is closed. ``sup_bound`` and ``class_a_norm`` are
    propagated bounds: a monotone piece bounded by B has norm at most 2B,
    weighted sums add weighted norms, a product of norms K1, K2 has norm at
    most 2*K1*K2.
    """

    pieces: tuple
    combiner: tuple
    class_a_norm: float
    sup_bound: float

    def __post_init__(self):
        _check_tree(self.combiner, len(self.pieces))

    @classmethod
    def from_piece(cls, piece: MonotonePiece) -> "ClassAFn":
        return cls((piece,), ("piece", 0), 2.0 * piece.bound, piece.bound)

    @property
    def jumps(self) -> tuple:
        pts = sorted({float(j) for p in self.pieces for j in p.jumps})
        return tuple(pts)

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        vals = [np.asarray(p.func(xa), dtype=float) for p in self.pieces]
        return _as_output(x, np.asarray(_eval_tree(self.combiner, vals, xa.shape), dtype=float))

    def _merged(self, other: "ClassAFn"):
        off = len(self.pieces)
        return self.pieces + other.pieces, _shift_tree(other.combiner, off)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = constant(float(other))
        if not isinstance(other, ClassAFn):
            return NotImplemented
        pieces, rhs = self._merged(other)
        tree = ("sum", ((1.0, self.combiner), (1.0, rhs)))
        return ClassAFn(pieces, tree, self.class_a_norm + other.class_a_norm,
                        self.sup_bound + other.sup_bound)

    __radd__ = __add__

    def __neg__(self):
        return (-1.0) * self

    def __sub__(self, other):
        if isinstance(other, (int, float)):
            other = constant(float(other))
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            w = float(other)
            tree = ("sum", ((w, self.combiner),))
            return ClassAFn(self.pieces, tree, abs(w) * self.class_a_norm,
                            abs(w) * self.sup_bound)
        if not isinstance(other, ClassAFn):
            return NotImplemented
        pieces, rhs = self._merged(other)
        tree = ("prod", (self.combiner, rhs))
        return ClassAFn(pieces, tree, 2.0 * self.class_a_norm * other.class_a_norm,
                        self.sup_bound * other.sup_bound)

    __rmul__ = __mul__


def _check_tree(node, n_pieces):
    kind = node[0]
    if kind == "piece":
        if not 0 <= node[1] < n_pieces:
            raise ValueError(f"piece index {node[1]} out of range")
    elif kind == "sum":
        for w, child in node[1]:
            if not math.isfinite(w):
                raise ValueError("sum weights must be finite")
            _check_tree(child, n_pieces)
    elif kind == "prod":
        for child in node[1]:
            _check_tree(child, n_pieces)
    else:
        raise ValueError(f"operation {kind!r} is not closed in the class")


def _shift_tree(node, off):
    kind = node[0]
    if kind == "piece":
        return ("piece", node[1] + off)
    if kind == "sum":
        return ("sum", tuple((w, _shift_tree(c, off)) for w, c in node[1]))
    return ("prod", tuple(_shift_tree(c, off) for c in node[1]))


def _eval_tree(node, vals, shape):
    kind = node[0]
    if kind == "piece":
        return vals[node[1]]
    if kind == "sum":
        out = np.zeros(shape)
        for w, child in node[1]:
            out = out + w * _eval_tree(child, vals, shape)
        return out
    out = np.ones(shape)
    for child in node[1]:
        out = out * _eval_tree(child, vals, shape)
    return out


def monotone(func: Func, bound: float, increasing: bool = True,
             jumps: Sequence[float] = (), name: str = "monotone") -> ClassAFn:
    """Wrap a bounded monotone function as a class-A primitive."""
    return ClassAFn.from_piece(MonotonePiece(func, float(bound), increasing,
                                             tuple(float(j) for j in jumps), name))


def constant(c: float) -> ClassAFn:
    return monotone(lambda x, c=c: np.full(np.shape(x), c), abs(c), True, (), f"const({c})")


# Indicator convention: the jump point belongs to the closed side.
def indicator_ge(a: float) -> ClassAFn:
    return monotone(lambda x: (x >= a).astype(float), 1.0, True, (a,), f"1[x>={a}]")


def indicator_gt(a: float) -> ClassAFn:
    return monotone(lambda x: (x > a).astype(float), 1.0, True, (a,), f"1[x>{a}]")


def indicator_le(b: float) -> ClassAFn:
    return monotone(lambda x: (x <= b).astype(float), 1.0, False, (b,), f"1[x<={b}]")


def indicator_lt(b: float) -> ClassAFn:
    return monotone(lambda x: (x < b).astype(float), 1.0, False, (b,), f"1[x<{b}]")


def sign() -> ClassAFn:
    """sign(x) with sign(0) = 0."""
    return monotone(np.sign, 1.0, True, (0.0,), "sign")


# ---------------------------------------------------------------------------
# C1 cutoff


def smoothstep(t):
    """3t^2 - 2t^3 on [0, 1], clamped outside."""
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def cutoff(x, m: float):
    """C1 cutoff: 1 on [-m, m], 0 outside [-(m+2), m+2], |derivative| <= 3/4."""
    xa = np.asarray(x, dtype=float)
    g = 1.0 - smoothstep((np.abs(xa) - m) / 2.0)
    return _as_output(x, g)


def cutoff_derivative(x, m: float):
    xa = np.asarray(x, dtype=float)
    t = (np.abs(xa) - m) / 2.0
    inside = (t > 0.0) & (t < 1.0)
    d = np.where(inside, -3.0 * t * (1.0 - t) * np.sign(xa), 0.0)
    return _as_output(x, d)


def _rising_ramp(m):
    # equals cutoff on (-inf, 0], 1 on [0, inf): increasing
    return lambda x: np.where(x < 0.0, 1.0 - smoothstep((-x - m) / 2.0), 1.0)


def _falling_ramp(m):
    return lambda x: np.where(x > 0.0, 1.0 - smoothstep((x - m) / 2.0), 1.0)


def _cutoff_class_a(m: float) -> ClassAFn:
    up = monotone(_rising_ramp(m), 1.0, True, (), f"rise[{m}]")
    down = monotone(_falling_ramp(m), 1.0, False, (), f"fall[{m}]")
    return up * down


# ---------------------------------------------------------------------------
# Drift, diffusion, problem


@dataclass(frozen=True)
class DriftSpec:
    """b = class-A part + Hölder part.

    ``l1_norm`` is a bound on the L1 norm of b, ``math.inf`` when b is not
    integrable. ``breakpoints`` are the discontinuities of b.
    """

    class_a_part: Optional[ClassAFn] = None
    hoelder_part: Optional[HoelderFn] = None
    sup_bound: float = 0.0
    l1_norm: float = 0.0
    label: str = ""
    extra_breakpoints: tuple = ()
    truncation_m: Optional[float] = None

    def __post_init__(self):
        if self.sup_bound < 0.0 or not math.isfinite(self.sup_bound):
            raise ValueError("drift must be bounded: sup_bound must be finite and >= 0")
        if self.l1_norm < 0.0:
            raise ValueError("l1_norm must be non-negative (use math.inf if not integrable)")

    @property
    def integrable(self) -> bool:
        return math.isfinite(self.l1_norm)

    @property
    def breakpoints(self) -> tuple:
        pts = set(self.extra_breakpoints)
        if self.class_a_part is not None:
            pts.update(self.class_a_part.jumps)
        return tuple(sorted(pts))

    @property
    def beta(self) -> float:
        return self.hoelder_part.beta if self.hoelder_part is not None else 1.0

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        out = np.zeros(xa.shape)
        if self.class_a_part is not None:
            out = out + self.class_a_part(xa)
        if self.hoelder_part is not None:
            out = out + self.hoelder_part(xa)
        return _as_output(x, out)


@dataclass(frozen=True)
class DiffusionSpec:
    """sigma with ellipticity/bound constant ``k_sigma`` and Hölder exponent
    1/2 + ``alpha``. ``constant`` marks sigma as a constant function."""

    evaluate: Func
    k_sigma: float
    alpha: float
    label: str = ""
    constant: Optional[float] = None

    def __post_init__(self):
        if not self.k_sigma >= 1.0:
            raise ValueError(f"k_sigma must be >= 1, got {self.k_sigma}")
        if not 0.0 <= self.alpha <= 0.5:
            raise ValueError(f"alpha must lie in [0, 1/2], got {self.alpha}")

    @property
    def lipschitz(self) -> bool:
        return self.alpha == 0.5

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        return _as_output(x, np.broadcast_to(np.asarray(self.evaluate(xa), dtype=float), xa.shape))


@dataclass(frozen=True)
class SdeProblem:
    """dX = b(X) dt + sigma(X) dW, X_0 = x0 on [0, horizon]."""

    drift: DriftSpec
    diffusion: DiffusionSpec
    x0: float = 0.0
    horizon: float = 1.0
    label: str = ""
    params: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.horizon > 0.0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not math.isfinite(self.x0):
            raise ValueError("x0 must be finite")

    @property
    def alpha(self) -> float:
        return self.diffusion.alpha

    @property
    def beta(self) -> float:
        return self.drift.beta


def eval_drift(spec: DriftSpec, x):
    """b_A(x) + b_H(x)."""
    return spec(x)


# ---------------------------------------------------------------------------
# Sampled regularity validation

_SLACK = 1e-9


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst_slack: float
    worst_pair: tuple = ()
    detail: str = ""

    def line(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        where = f" at {self.worst_pair}" if self.worst_pair and not self.passed else ""
        return f"[{flag}] {self.name}: worst slack {self.worst_slack:.3e}{where}"


@dataclass
class RegularityReport:
    problem: str
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def __str__(self):
        return "\n".join([f"regularity of {self.problem}:"] + [c.line() for c in self.checks])


def _sample_points(rng, k, radius=10.0):
    half = k // 2
    uni = rng.uniform(-radius, radius, size=half)
    tail = rng.standard_cauchy(size=k - half) * radius
    return np.concatenate([uni, tail])


def _sample_pairs(rng, k):
    x = _sample_points(rng, k)
    # half independent, half close pairs (log-uniform gaps) to probe small scales
    y = _sample_points(rng, k)
    near = rng.random(k) < 0.5
    gaps = 10.0 ** rng.uniform(-6.0, 0.5, size=k) * rng.choice([-1.0, 1.0], size=k)
    y = np.where(near, x + gaps, y)
    keep = x != y
    return x[keep], y[keep]


def _worst(slack, x, y=None):
    i = int(np.argmin(slack))
    pair = (float(x[i]),) if y is None else (float(x[i]), float(y[i]))
    return float(slack[i]), pair


def _bound_check(name, values, bound, x):
    slack = bound - np.abs(values)
    s, pair = _worst(slack, x)
    return CheckResult(name, s >= -_SLACK, s, pair)


def _hoelder_check(name, fx, fy, const, expo, x, y):
    slack = const * np.abs(x - y) ** expo - np.abs(fx - fy)
    s, pair = _worst(slack, x, y)
    return CheckResult(name, s >= -_SLACK, s, pair)


def verify_regularity(problem: SdeProblem, samples: int = 10_000, seed: int = 0,
                      l1_radius: float = 200.0) -> RegularityReport:
    """Check the coefficient assumptions on sampled points and pairs.

    Points are uniform on [-10, 10] mixed with Cauchy tails; half of the
    pairs are close (gaps from 1e-6 to ~3). Inequalities are checked with
    slack 1e-9. Violations are reported, never raised.
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    rng = np.random.default_rng(seed)
    drift, diff = problem.drift, problem.diffusion
    x, y = _sample_pairs(rng, samples)
    checks = []

    k = diff.k_sigma
    sx, sy = diff(x), diff(y)
    sq = sx * sx
    lo = sq - 1.0 / (k * k)
    hi = k * k - sq
    s_lo, p_lo = _worst(lo, x)
    s_hi, p_hi = _worst(hi, x)
    checks.append(CheckResult("diffusion ellipticity", s_lo >= -_SLACK, s_lo, p_lo))
    checks.append(CheckResult("diffusion bound", s_hi >= -_SLACK, s_hi, p_hi))
    checks.append(_hoelder_check("diffusion Hoelder", sx, sy, k, 0.5 + diff.alpha, x, y))

    bx = drift(x)
    checks.append(_bound_check("drift sup bound", bx, drift.sup_bound, x))

    if drift.hoelder_part is not None:
        h = drift.hoelder_part
        hx, hy = h(x), h(y)
        checks.append(_bound_check("Hoelder part bound", hx, h.hoelder_norm, x))
        checks.append(_hoelder_check("Hoelder part seminorm", hx, hy, h.hoelder_norm, h.beta, x, y))

    if drift.class_a_part is not None:
        a = drift.class_a_part
        checks.append(_bound_check("class-A part bound", a(x), a.sup_bound, x))
        grid = np.sort(np.concatenate([x, np.linspace(-12.0, 12.0, 2001)]))
        for i, piece in enumerate(a.pieces):
            v = np.asarray(piece.func(grid), dtype=float)
            steps = np.diff(v) if piece.increasing else -np.diff(v)
            s, pair = _worst(steps, grid[:-1], grid[1:])
            checks.append(CheckResult(f"piece {i} ({piece.name}) monotone", s >= -_SLACK, s, pair))
            checks.append(_bound_check(f"piece {i} ({piece.name}) bound", v, piece.bound, grid))

    if drift.integrable:
        bps = [b for b in drift.breakpoints if -l1_radius < b < l1_radius]
        mass, _ = integrate(lambda t: np.abs(drift(t)), -l1_radius, l1_radius,
                            breakpoints=bps, tol=1e-8, min_width=1.0)
        slack = drift.l1_norm + 1e-6 - mass
        checks.append(CheckResult("drift L1 norm", slack >= 0.0, slack, (),
                                  f"quadrature {mass:.10g} vs declared {drift.l1_norm:.10g}"))
    return RegularityReport(problem.label or "problem", checks)


# ---------------------------------------------------------------------------
# Truncation


def truncate_drift(spec: DriftSpec, m: float) -> DriftSpec:
    """b_m = b * g_m with the C1 cutoff g_m; integrable with
    ||b_m||_1 <= (2m + 2) ||b||_inf."""
    if not m >= 1:
        raise ValueError(f"m must be >= 1, got {m}")
    m = float(m)
    a_part = None
    if spec.class_a_part is not None:
        raw = spec.class_a_part * _cutoff_class_a(m)
        # sharper than the generic product rule for this cutoff
        a_part = ClassAFn(raw.pieces, raw.combiner,
                          min(raw.class_a_norm, 3.0 * spec.class_a_part.class_a_norm),
                          spec.class_a_part.sup_bound)
    h_part = None
    if spec.hoelder_part is not None:
        h = spec.hoelder_part
        h_part = HoelderFn(lambda x, f=h.evaluate: f(x) * cutoff(x, m), h.beta,
                           2.0 * h.hoelder_norm)
    l1 = min(spec.l1_norm, (2.0 * m + 2.0) * spec.sup_bound)
    return DriftSpec(a_part, h_part, spec.sup_bound, l1,
                     label=f"{spec.label}*g_{m:g}" if spec.label else f"g_{m:g}",
                     extra_breakpoints=spec.extra_breakpoints, truncation_m=m)


# ---------------------------------------------------------------------------
# Gallery


def _unit_diffusion(k_sigma=1.0):
    return DiffusionSpec(lambda x: np.ones_like(x), k_sigma, 0.5, "1", constant=1.0)


def _g1(kappa=1.0, **kw):
    """kappa * 1[x >= 0], sigma = 1: discontinuous, not integrable."""
    drift = DriftSpec(kappa * indicator_ge(0.0), None, abs(kappa), math.inf,
                      label=f"{kappa:g}*1[x>=0]")
    return drift, _unit_diffusion(), {"kappa": kappa}


def _g2(m=2, **kw):
    """-clip(x, -1, 1) cut off by g_m, sigma = 1."""
    base = DriftSpec(monotone(lambda x: -np.clip(x, -1.0, 1.0), 1.0, False, (), "-clip"),
                     None, 1.0, math.inf, label="-clip(x,-1,1)")
    return truncate_drift(base, m), _unit_diffusion(), {"m": m}


def _g3(beta=0.5, c=1.0, **kw):
    """c ((1 - |x|)^+)^beta, sigma = 1: Hölder drift only."""
    h = HoelderFn(lambda x: c * np.maximum(1.0 - np.abs(x), 0.0) ** beta, beta, 2.0 * abs(c))
    drift = DriftSpec(None, h, abs(c), 2.0 * abs(c) / (beta + 1.0),
                      label=f"{c:g}*((1-|x|)^+)^{beta:g}")
    return drift, _unit_diffusion(), {"beta": beta, "c": c}


def _g4(alpha=0.25, **kw):
    """1[0 < x < 1], sigma = 1 + (|x| ^ 1)^(1/2 + alpha)."""
    expo = 0.5 + alpha
    drift = DriftSpec(indicator_gt(0.0) * indicator_lt(1.0), None, 1.0, 1.0,
                      label="1[0<x<1]")
    diff = DiffusionSpec(lambda x: 1.0 + np.minimum(np.abs(x), 1.0) ** expo, 2.0, alpha,
                         f"1+(|x|^1)^{expo:g}")
    return drift, diff, {"alpha": alpha}


def _g5(**kw):
    """b = 0, sigma = 1: Euler-Maruyama is exact."""
    return DriftSpec(label="0"), _unit_diffusion(), {}


def _g6(kappa=1.0, **kw):
    """-kappa tanh(x) sech(x), sigma = 1: smooth, Lipschitz, integrable."""
    def b(x):
        e = np.exp(-np.abs(x))
        return -kappa * np.tanh(x) * (2.0 * e / (1.0 + e * e))

    h = HoelderFn(b, 1.0, 1.5 * abs(kappa))
    drift = DriftSpec(None, h, 0.5 * abs(kappa), 2.0 * abs(kappa),
                      label=f"-{kappa:g}*tanh(x)sech(x)")
    return drift, _unit_diffusion(), {"kappa": kappa}


GALLERY = {
    "G1": _g1,
    "G2": _g2,
    "G3": _g3,
    "G4": _g4,
    "G5": _g5,
    "G6": _g6,
}


def gallery_problem(name: str, x0: float = 0.0, horizon: float = 1.0, **params) -> SdeProblem:
    """Build a named test problem; keyword params override the defaults."""
    try:
        factory = GALLERY[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; gallery: {', '.join(sorted(GALLERY))}") from None
    import inspect
    allowed = set(inspect.signature(factory).parameters) - {"kw"}
    bad = set(params) - allowed
    if bad:
        raise TypeError(f"{name} does not take parameters {sorted(bad)}; allowed: {sorted(allowed)}")
    drift, diff, used = factory(**params)
    return SdeProblem(drift, diff, float(x0), float(horizon), name, dict(used))
