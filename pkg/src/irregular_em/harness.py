"""Experiment configs, presets, the experiment runner and the self-test."""
from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib
import tomli_w

from . import coefficients as co
from . import simulate as sim
from . import transform as tr
from . import yamada_watanabe as yw
from .error_stats import (NORMS, ErrorEstimate, estimates_to_csv, fit_rate, strong_errors,
                          theoretical_rate)
from .quadrature import adaptive_simpson

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "ExperimentReport",
    "PRESETS",
    "preset",
    "load_config",
    "dump_config",
    "config_from_dict",
    "run_experiment",
    "selftest",
    "SelftestReport",
]

EXACT_TOL = 1e-12


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the key."""


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str
    n_list: tuple
    paths: int
    seed: int
    norms: tuple = ("L1_terminal",)
    n_ref_factor: int = 128
    problem_params: dict = field(default_factory=dict)
    x0: float = 0.0
    horizon: float = 1.0
    p: Optional[float] = None
    gamma: Optional[float] = None
    truncation_m: tuple = ()
    stop_level: Optional[float] = None
    martingale_check: bool = False
    gate_tolerance: float = 0.1
    block_size: int = sim.DEFAULT_BLOCK
    output: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "norms", tuple(self.norms))
        tm = self.truncation_m
        if tm is None:
            tm = ()
        elif isinstance(tm, (int, float)):
            tm = (tm,)
        object.__setattr__(self, "truncation_m", tuple(int(m) for m in tm))
        object.__setattr__(self, "problem_params", dict(self.problem_params))
        self.validate()

    def validate(self):
        if self.problem not in co.GALLERY:
            raise ConfigError(f"problem.name: unknown problem {self.problem!r}; "
                              f"gallery: {', '.join(sorted(co.GALLERY))}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or self.seed < 0:
            raise ConfigError("seed: an explicit non-negative integer seed is required")
        if self.paths < 100:
            raise ConfigError(f"paths: need at least 100 paths, got {self.paths}")
        ns = self.n_list
        if len(ns) < 1 or ns[0] < 1:
            raise ConfigError("n_list: needs positive step counts")
        for a, b in zip(ns[:-1], ns[1:]):
            if b <= a:
                raise ConfigError("n_list: must be strictly increasing")
        for n in ns:
            r = n // ns[0]
            if n % ns[0] or r & (r - 1):
                raise ConfigError(f"n_list: {n} is not {ns[0]} times a power of two")
        f = self.n_ref_factor
        if f < 1 or f & (f - 1):
            raise ConfigError(f"n_ref_factor: must be a power of two, got {f}")
        if not self.norms:
            raise ConfigError("norms: at least one norm is required")
        for nm in self.norms:
            if nm not in NORMS:
                raise ConfigError(f"norms: unknown norm {nm!r}; expected one of {NORMS}")
        if "Lp_sup" in self.norms and (self.p is None or self.p < 1.0):
            raise ConfigError("p: Lp_sup needs p >= 1")
        if "gamma_sup" in self.norms and (self.gamma is None or not 0.0 < self.gamma < 1.0):
            raise ConfigError("gamma: gamma_sup needs gamma in (0, 1)")
        for m in self.truncation_m:
            if m < 1:
                raise ConfigError("truncation_m: values must be >= 1")
        if self.horizon <= 0.0:
            raise ConfigError("problem.horizon: must be positive")
        if self.block_size < 1:
            raise ConfigError("block_size: must be positive")
        try:
            prob = co.gallery_problem(self.problem, self.x0, self.horizon, **self.problem_params)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"problem.params: {exc}") from None
        if self.martingale_check and not prob.drift.integrable and not self.truncation_m:
            raise ConfigError("truncation_m: drift is not integrable; the transform check "
                              "needs a truncation level")

    def problems(self):
        """(label, problem, original drift integrable) for each truncation level."""
        base = co.gallery_problem(self.problem, self.x0, self.horizon, **self.problem_params)
        if not self.truncation_m:
            return [(self.problem, base, base.drift.integrable)]
        out = []
        for m in self.truncation_m:
            prob = replace(base, drift=co.truncate_drift(base.drift, m), label=f"{self.problem}[m={m}]")
            out.append((prob.label, prob, base.drift.integrable))
        return out


# ---------------------------------------------------------------------------
# TOML round trip

_TOP = ("seed", "paths", "n_list", "n_ref_factor", "norms", "p", "gamma", "truncation_m",
        "stop_level", "martingale_check", "gate_tolerance", "block_size", "output")


def config_to_dict(cfg: ExperimentConfig) -> dict:
    d = {}
    for k in _TOP:
        v = getattr(cfg, k)
        if v is None or (k == "truncation_m" and not v):
            continue
        d[k] = list(v) if isinstance(v, tuple) else v
    d["problem"] = {"name": cfg.problem, "x0": cfg.x0, "horizon": cfg.horizon}
    if cfg.problem_params:
        d["problem"]["params"] = dict(cfg.problem_params)
    return d


def config_from_dict(d: dict) -> ExperimentConfig:
    d = dict(d)
    prob = d.pop("problem", None)
    if not isinstance(prob, dict) or "name" not in prob:
        raise ConfigError("problem.name: missing [problem] section with a name")
    for key in ("seed", "paths", "n_list"):
        if key not in d:
            raise ConfigError(f"{key}: required key is missing")
    unknown = set(d) - set(_TOP)
    if unknown:
        raise ConfigError(f"{sorted(unknown)[0]}: unknown key")
    extra = set(prob) - {"name", "x0", "horizon", "params"}
    if extra:
        raise ConfigError(f"problem.{sorted(extra)[0]}: unknown key")
    kw = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
    try:
        return ExperimentConfig(problem=prob["name"], x0=float(prob.get("x0", 0.0)),
                                horizon=float(prob.get("horizon", 1.0)),
                                problem_params=dict(prob.get("params", {})), **kw)
    except TypeError as exc:
        raise ConfigError(f"config: {exc}") from None


def dump_config(cfg: ExperimentConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def load_config(source) -> ExperimentConfig:
    """Parse a TOML file path or TOML text."""
    text = source
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                    and Path(source).exists()):
        text = Path(source).read_text()
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config: not valid TOML ({exc})") from None
    return config_from_dict(data)


# ---------------------------------------------------------------------------
# presets

PRESETS = {
    # stopping-time / terminal L1 and gamma-moment under a Hölder diffusion
    "thm-2.2": ExperimentConfig("G4", tuple(2 ** k for k in range(4, 10)), 2000, 42,
                                ("L1_terminal", "L1_stopping", "gamma_sup"), 32,
                                {"alpha": 0.25}, gamma=0.5),
    # L1 of the running sup under a Hölder diffusion
    "thm-2.4": ExperimentConfig("G4", tuple(2 ** k for k in range(5, 11)), 4000, 42,
                                ("L1_terminal", "L1_sup"), 16, {"alpha": 0.25}),
    # L2 of the running sup, Lipschitz diffusion, discontinuous drift
    "thm-2.6": ExperimentConfig("G4", tuple(2 ** k for k in range(5, 11)), 4000, 42,
                                ("Lp_sup",), 16, {"alpha": 0.5}, p=2.0),
    # Hölder drift, Lipschitz diffusion, sup norm
    "cor-2.7": ExperimentConfig("G3", tuple(2 ** k for k in range(5, 11)), 4000, 42,
                                ("Lp_sup",), 16, {"beta": 0.5}, p=1.0),
    # non-integrable drift handled through truncation levels m = 5, 10
    "thm-2.3-truncation": ExperimentConfig("G1", tuple(2 ** k for k in range(5, 11)), 4000, 42,
                                           ("L1_terminal", "L1_sup"), 16, {"kappa": 1.0},
                                           truncation_m=(5, 10)),
}


def preset(name: str, **overrides) -> ExperimentConfig:
    try:
        cfg = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; presets: {', '.join(PRESETS)}") from None
    return replace(cfg, **overrides) if overrides else cfg


# ---------------------------------------------------------------------------
# running


@dataclass
class Gate:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    estimates: dict          # label -> norm -> [ErrorEstimate]
    fits: dict               # (label, norm) -> RateFit
    rates: dict              # (label, norm) -> RateDescriptor
    gates: list
    csv_text: str
    exact: dict              # label -> bool
    martingale: dict = field(default_factory=dict)

    @property
    def exit_code(self) -> int:
        return 0 if all(g.passed for g in self.gates) else 1

    def summary(self) -> str:
        lines = []
        for label, per_norm in self.estimates.items():
            lines.append(f"== {label} ==")
            if self.exact[label]:
                lines.append("exact scheme: all errors <= 1e-12, no rate fit attempted")
            for norm, ests in per_norm.items():
                lines.append(f"  {norm}" + (f" (p = {ests[0].p:g})" if ests[0].p else ""))
                lines.append(f"    {'n':>8} {'mean':>12} {'std_error':>12}")
                for e in ests:
                    lines.append(f"    {e.n:>8d} {e.mean:12.5e} {e.std_error:12.5e}")
                fit = self.fits.get((label, norm))
                rate = self.rates.get((label, norm))
                if fit is not None:
                    sub = " x subpolynomial factor" if rate.subpolynomial else ""
                    unit = "1/log n" if rate.mode == "logarithmic" else "1/n"
                    lines.append(f"    empirical slope {fit.slope:.4f} (R^2 {fit.r_squared:.4f}); "
                                 f"proven ({unit})^{rate.exponent:.4g}{sub}")
            if label in self.martingale:
                lines.append(f"  martingale check: {self.martingale[label]}")
        lines.append("gates:")
        lines.extend("  " + g.line() for g in self.gates)
        return "\n".join(lines)


def _fit_values(ests):
    # Lp_sup rates bound the mean p-th power
    if ests and ests[0].norm == "Lp_sup":
        return [ErrorEstimate(e.n, e.norm, e.raw_moment, e.raw_std_error, e.paths, e.p)
                for e in ests]
    return ests


def run_experiment(config: ExperimentConfig, workers: Optional[int] = None,
                   write: bool = True) -> ExperimentReport:
    """Simulate, fit and compare every norm of the config; optionally write CSV."""
    rows, fit_rows, gates = [], [], []
    estimates, fits, rates, exact, mart = {}, {}, {}, {}, {}
    slopes_by_norm = {}
    for label, prob, integrable in config.problems():
        expo = {"Lp_sup": config.p, "gamma_sup": config.gamma}
        ests = strong_errors(prob, config.norms, config.n_list, config.n_ref_factor, config.paths,
                             config.seed, p=config.p, gamma=config.gamma,
                             stop_level=config.stop_level, block_size=config.block_size,
                             workers=workers)
        estimates[label] = ests
        for norm in config.norms:
            rows.extend((label, config.seed, e) for e in ests[norm])
        is_exact = all(e.mean <= EXACT_TOL for es in ests.values() for e in es)
        exact[label] = is_exact
        if is_exact:
            gates.append(Gate(f"{label} exactness", True, "all errors <= 1e-12"))
        elif len(config.n_list) >= 3:
            for norm in config.norms:
                rate = theoretical_rate(prob.alpha, prob.beta, norm, expo.get(norm),
                                        l1_drift=integrable,
                                        hoelder_only=prob.drift.class_a_part is None)
                fit = fit_rate(_fit_values(ests[norm]), rate.mode)
                fits[(label, norm)] = fit
                rates[(label, norm)] = rate
                need = rate.exponent - config.gate_tolerance
                ok = fit.slope >= need
                gates.append(Gate(f"{label} {norm} rate", ok,
                                  f"slope {fit.slope:.4f} >= {need:.4f}"))
                slopes_by_norm.setdefault(norm, []).append(fit.slope)
                fit_rows.append({"problem": label, "norm": norm, "p": expo.get(norm),
                                 "mode": fit.mode, "slope": fit.slope,
                                 "intercept": fit.intercept, "r_squared": fit.r_squared,
                                 "theoretical_exponent": rate.exponent,
                                 "subpolynomial": rate.subpolynomial,
                                 "gate": need, "passed": ok})
        if config.martingale_check:
            tables = tr.build_transform(prob)
            rep = tr.martingale_diagnostic(prob, tables, max(config.n_list), config.paths,
                                           config.seed, block_size=config.block_size,
                                           workers=workers)
            mart[label] = rep
            gates.append(Gate(f"{label} martingale", abs(rep.z_score) <= 4.0,
                              f"|z| = {abs(rep.z_score):.3f} <= 4"))
    if len(config.truncation_m) > 1:
        for norm, sl in slopes_by_norm.items():
            spread = max(sl) - min(sl)
            gates.append(Gate(f"truncation insensitivity {norm}", spread <= config.gate_tolerance,
                              f"slope spread {spread:.4f} <= {config.gate_tolerance}"))
    csv_text = estimates_to_csv(rows, fit_rows)
    if write and config.output:
        Path(config.output).write_text(csv_text)
    return ExperimentReport(config, estimates, fits, rates, gates, csv_text, exact, mart)


# ---------------------------------------------------------------------------
# self-test


@dataclass
class SelftestReport:
    items: list

    @property
    def passed(self) -> bool:
        return all(i.passed for i in self.items)

    def failures(self) -> list:
        return [i for i in self.items if not i.passed]

    def __str__(self):
        return "\n".join(i.line() for i in self.items)


def _yw_checks(psi_fn):
    rng = np.random.default_rng(2024)
    items = []
    worst_norm = 0.0
    worst_dom = -np.inf
    worst_37 = -np.inf
    worst_38 = 0.0
    worst_39 = 0.0
    for _ in range(100):
        p = yw.YwParams(float(rng.uniform(1.05, 50.0)), float(rng.uniform(0.01, 0.99)))
        val, _ = adaptive_simpson(lambda z: psi_fn(p, z), p.lower, p.epsilon, 1e-13)
        worst_norm = max(worst_norm, abs(float(val) - 1.0))
        z = np.exp(rng.uniform(math.log(p.lower), math.log(p.epsilon), 200))
        worst_dom = max(worst_dom, float(np.max(psi_fn(p, z) - 2.0 / (z * p.log_delta))))
        x = rng.uniform(-2.0, 2.0, 50)
        worst_37 = max(worst_37, float(np.max(np.abs(x) - p.epsilon - yw.yw_phi(p, x))))
        worst_38 = max(worst_38, float(np.max(np.abs(yw.yw_phi_prime(p, x)))))
        r = np.abs(x)
        band = (r >= p.lower) & (r <= p.epsilon)
        second = yw.yw_phi_second(p, x)
        out_band = float(np.max(np.abs(second[~band]))) if np.any(~band) else 0.0
        in_band = float(np.max(second[band] - 2.0 / (r[band] * p.log_delta))) if np.any(band) else -1.0
        worst_39 = max(worst_39, out_band, in_band)
    items.append(Gate("psi normalization", worst_norm <= 1e-10, f"max |int psi - 1| = {worst_norm:.2e}"))
    items.append(Gate("psi dominance", worst_dom <= 1e-12, f"max excess {worst_dom:.2e}"))
    items.append(Gate("YW |x| <= eps + phi", worst_37 <= 1e-10, f"max excess {worst_37:.2e}"))
    items.append(Gate("YW |phi'| <= 1", worst_38 <= 1 + 1e-12, f"max |phi'| = {worst_38:.12f}"))
    items.append(Gate("YW phi'' support and bound", worst_39 <= 1e-12, f"max excess {worst_39:.2e}"))
    return items


def _transform_checks():
    items = []
    rng = np.random.default_rng(7)
    for name in ("G2", "G3", "G4", "G6"):
        prob = co.gallery_problem(name)
        tb = tr.build_transform(prob)
        x = rng.uniform(tb.x_lo, tb.x_hi, 1000)
        s = prob.diffusion(x)
        resid = prob.drift(x) * tr.phi_prime(tb, x) + 0.5 * s * s * tr.phi_second(tb, x)
        scale = 1.0 + np.abs(prob.drift(x) * tr.phi_prime(tb, x))
        pde = float(np.max(np.abs(resid) / scale))
        items.append(Gate(f"{name} transform PDE identity", pde <= 1e-14, f"max residual {pde:.2e}"))
        slopes = np.diff(tb.phi_values) / np.diff(tb.grid)
        lo_ok = float(np.min(slopes)) >= 1.0 / tb.c0 - 1e-9
        hi_ok = float(np.max(slopes)) <= tb.c0 + 1e-9
        items.append(Gate(f"{name} phi' bounds", lo_ok and hi_ok,
                          f"slopes in [{np.min(slopes):.6f}, {np.max(slopes):.6f}], C0 = {tb.c0:.6g}"))
        z = rng.uniform(tb.phi_lo, tb.phi_hi, 1000)
        xi = tr.phi_inverse(tb, z)
        back = float(np.max(np.abs(tr.phi(tb, xi) - z)))
        items.append(Gate(f"{name} phi(phi^-1(z)) = z", back <= 10 * tb.quad_tol, f"max error {back:.2e}"))
        z2 = rng.uniform(tb.phi_lo, tb.phi_hi, 1000)
        lip = np.abs(xi - tr.phi_inverse(tb, z2)) - tb.c0 * np.abs(z - z2)
        items.append(Gate(f"{name} phi^-1 Lipschitz", float(np.max(lip)) <= 1e-9,
                          f"max excess {float(np.max(lip)):.2e}"))
        mono = bool(np.all(np.diff(tb.phi_values) > 0.0))
        items.append(Gate(f"{name} phi strictly increasing", mono, f"{len(tb.grid)} nodes"))
    return items


def _coupling_checks():
    items = []
    for name in ("G1", "G4"):
        prob = co.gallery_problem(name)
        g = sim.sample_grid(1.0, 1024, 11, stream=5)
        mid = sim.BrownianGrid(1.0, 256, g.coarse(256), 11, 5)
        a = sim.em_path(prob, g, 64)
        b = sim.em_path(prob, mid, 64)
        items.append(Gate(f"{name} coupling via pre-coarsened grid", np.array_equal(a.values, b.values),
                          "bit-identical" if np.array_equal(a.values, b.values) else "differs"))
        errs = sim.coupled_errors(prob, (64, 256), 1024, 8, 11, block_size=8)
        ref = sim.em_path(prob, g, 1024)
        same = errs.terminal[0, 5] == abs(ref.values[-1] - a.values[-1])
        items.append(Gate(f"{name} batched engine matches single path", bool(same),
                          "bit-identical" if same else "differs"))
    return items


def _cutoff_checks():
    items = []
    for m in (1, 2, 5, 10):
        x = np.linspace(-(m + 4), m + 4, 200001)
        g = co.cutoff(x, m)
        outside = np.abs(x) >= m + 2
        plateau = np.abs(x) <= m
        h = 1e-6
        fd = (co.cutoff(x + h, m) - co.cutoff(x - h, m)) / (2 * h)
        ok = (np.all(g[outside] == 0.0) and np.all(g[plateau] == 1.0)
              and np.all((g >= 0.0) & (g <= 1.0)) and np.max(np.abs(fd)) <= 1.0 + 1e-6)
        items.append(Gate(f"cutoff g_{m} contract", bool(ok), f"max |g'| = {np.max(np.abs(fd)):.6f}"))
    return items


def _regularity_checks():
    items = []
    for name in sorted(co.GALLERY):
        rep = co.verify_regularity(co.gallery_problem(name), 10_000, seed=3)
        bad = ", ".join(c.name for c in rep.failures())
        items.append(Gate(f"{name} regularity", rep.passed, bad or f"{len(rep.checks)} checks"))
    return items


def selftest(faults=()) -> SelftestReport:
    """Run the invariant suite; ``faults`` injects named defects (test hook).

    Supported fault: ``"psi_normalization"`` scales psi by 1.01.
    """
    psi_fn = yw.psi
    if "psi_normalization" in faults:
        psi_fn = lambda p, z: 1.01 * yw.psi(p, z)  # noqa: E731
        dom = _yw_checks(yw.psi)[1]
    items = _yw_checks(psi_fn)
    if "psi_normalization" in faults:
        items[1] = dom
    items += _transform_checks()
    items += _coupling_checks()
    items += _cutoff_checks()
    items += _regularity_checks()
    return SelftestReport(items)
