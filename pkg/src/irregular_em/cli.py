"""Command line: run, selftest, gallery, rates."""
from __future__ import annotations

import argparse
import inspect
import sys
from pathlib import Path

from . import coefficients as co
from .error_stats import NORMS, theoretical_rate
from .harness import PRESETS, ConfigError, load_config, preset, run_experiment, selftest


def _cmd_run(args) -> int:
    target = args.config
    try:
        if target in PRESETS:
            cfg = preset(target)
        elif Path(target).exists():
            cfg = load_config(Path(target))
        else:
            print(f"error: {target!r} is neither a config file nor a preset "
                  f"({', '.join(PRESETS)})", file=sys.stderr)
            return 2
        if args.output:
            from dataclasses import replace
            cfg = replace(cfg, output=args.output)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        report = run_experiment(cfg, workers=args.workers)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(report.summary())
    if cfg.output:
        print(f"csv written to {cfg.output}")
    else:
        sys.stdout.write(report.csv_text)
    return report.exit_code


def _cmd_selftest(args) -> int:
    rep = selftest(tuple(args.fault or ()))
    print(rep)
    n_bad = len(rep.failures())
    print(f"{len(rep.items) - n_bad}/{len(rep.items)} checks passed")
    return 0 if rep.passed else 1


def _cmd_gallery(args) -> int:
    for name in sorted(co.GALLERY):
        prob = co.gallery_problem(name)
        sig = inspect.signature(co.GALLERY[name])
        params = ", ".join(f"{p.name}={p.default}" for p in sig.parameters.values()
                           if p.kind is p.POSITIONAL_OR_KEYWORD)
        l1 = "inf" if not prob.drift.integrable else f"{prob.drift.l1_norm:g}"
        print(f"{name}  b = {prob.drift.label}, sigma = {prob.diffusion.label}")
        print(f"    alpha = {prob.alpha:g}, beta = {prob.beta:g}, ||b||_1 = {l1}, "
              f"params: {params or '-'}")
    return 0


def _cmd_rates(args) -> int:
    try:
        r = theoretical_rate(args.alpha, args.beta, args.norm, args.p,
                             l1_drift=not args.non_l1, hoelder_only=args.hoelder_only)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    unit = "1/log n" if r.mode == "logarithmic" else "1/n"
    extra = " x exp(C sqrt(log n))" if r.subpolynomial else ""
    print(f"{args.norm}: O(({unit})^{r.exponent:.6g}){extra}  [{r.mode}; {r.note}]")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="irregular-em",
                                 description="Strong-convergence lab for Euler-Maruyama "
                                             "with irregular coefficients.")
    sub = ap.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a TOML config or a preset name")
    r.add_argument("config", help=f"config path or preset ({', '.join(PRESETS)})")
    r.add_argument("--workers", type=int, default=None,
                   help="worker threads (results do not depend on this)")
    r.add_argument("--output", default=None, help="CSV path (overrides the config)")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("selftest", help="run the analytic invariant suite")
    s.add_argument("--fault", action="append", help=argparse.SUPPRESS)
    s.set_defaults(func=_cmd_selftest)

    g = sub.add_parser("gallery", help="list the test problems")
    g.set_defaults(func=_cmd_gallery)

    t = sub.add_parser("rates", help="print the proven rate for a regularity class")
    t.add_argument("--alpha", type=float, required=True)
    t.add_argument("--beta", type=float, required=True)
    t.add_argument("--norm", choices=NORMS, required=True)
    t.add_argument("--p", type=float, default=None, help="exponent for Lp_sup / gamma_sup")
    t.add_argument("--non-l1", action="store_true", help="drift is not integrable")
    t.add_argument("--hoelder-only", action="store_true", help="drift has no discontinuous part")
    t.set_defaults(func=_cmd_rates)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
