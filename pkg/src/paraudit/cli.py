"""Command line entry point.

Exit codes: 0 success, 1 invariant or acceptance violation, 2 configuration
error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from fractions import Fraction

from . import harness as hs
from . import ledger as lg
from .errors import FitError, ParauditError

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_IO = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _ints(text: str) -> tuple:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated integers, got {text!r}") from None


def _fraction(text: str) -> Fraction:
    try:
        return lg.as_fraction(text)
    except ParauditError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _common(p: argparse.ArgumentParser):
    p.add_argument("--out", help="write the artifact here instead of standard output")
    p.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    p.add_argument("--strict", action="store_true", help="abort on the first failing cell")
    p.add_argument("--workers", type=int, help=f"worker processes (default: ${hs.WORKERS_ENV} or 1)")
    p.add_argument("--timing", action="store_true", help="record wall time (breaks byte-identical output)")
    p.add_argument("--memory-cap-gb", type=float, default=hs.DEFAULT_MEMORY_CAP / 2**30)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="paraudit", description="Sweeps and exact exponent bookkeeping for the diagonal paraproduct.")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("ledger", help="exact exponent table and branch report")
    p.add_argument("--delta", type=_fraction, required=True)
    _common(p)

    p = sub.add_parser("hessian", help="two-dimensional Hessian block on sampled resonant pairs")
    p.add_argument("--lambda", dest="lambdas", type=_ints, default=tuple(2**j for j in range(6, 15)))
    p.add_argument("--delta", type=_fraction, default=Fraction(1, 2))
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    _common(p)

    p = sub.add_parser("angles", help="angle identity, null symbol and cross product bounds")
    p.add_argument("--lambdas", type=_ints, default=tuple(2**j for j in range(6, 15)))
    p.add_argument("--delta", type=_fraction, default=Fraction(1, 2))
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    _common(p)

    p = sub.add_parser("window", help="sup of the k-th derivative of the Gaussian window")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--n", dest="lambdas", type=_ints, default=(64,))
    p.add_argument("--delta", type=_fraction, default=Fraction(1, 2))
    _common(p)

    p = sub.add_parser("kernel", help="L2 size of the heat minus Schrodinger kernel on the short window")
    p.add_argument("--n", dest="lambdas", type=_ints, default=tuple(2**j for j in range(6, 13)))
    p.add_argument("--delta", type=_fraction, default=Fraction(1, 2))
    _common(p)

    p = sub.add_parser("tile-max", help="tile to max inequality on random trigonometric polynomials")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    _common(p)

    p = sub.add_parser("local-l4", help="space-time L4 on a single tile")
    p.add_argument("--lambdas", type=_ints, default=(8, 16, 32))
    p.add_argument("--delta", type=_fraction, default=Fraction(1, 2))
    p.add_argument("--grid-rule", type=int, default=8)
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--propagator", choices=("schrodinger", "heat"), default="schrodinger")
    _common(p)

    p = sub.add_parser("scaling", help="diagonal paraproduct ratio sweep and exponent fit")
    p.add_argument("--lambdas", type=_ints, default=(4, 8, 16))
    p.add_argument("--delta", type=_fraction, default=Fraction(1, 2))
    p.add_argument("--trials", type=int, default=4)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--grid-rule", type=int, default=5)
    _common(p)

    p = sub.add_parser("decoupling", help="decoupling ratio over antipodal cap pairs")
    p.add_argument("--lambdas", type=_ints, default=(8, 16, 32))
    p.add_argument("--delta", type=_fraction, default=Fraction(1, 2))
    p.add_argument("--rho", type=_fraction, default=Fraction(2, 3))
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid-rule", type=int, default=5)
    _common(p)

    p = sub.add_parser("commutator", help="commutator of the low-pass with a smooth bump")
    p.add_argument("--mus", dest="lambdas", type=_ints, default=(8, 16, 32, 64))
    p.add_argument("--n", dest="grid_n", type=int, default=128)
    p.add_argument("--degree", dest="bump_degree", type=int, default=hs.pp.BUMP_DEGREE)
    p.add_argument("--iters", type=int, default=200)
    p.add_argument("--method", choices=("power", "lanczos"), default="lanczos")
    p.add_argument("--chained", action="store_true", help="chained bound on div(u_N (x) v_N); --mus are then N")
    p.add_argument("--delta", type=_fraction, default=Fraction(1, 2))
    p.add_argument("--grid-rule", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    _common(p)

    p = sub.add_parser("verify-all", help="run the acceptance suite")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--quick", action="store_true", help="only suites with grids up to n = 64 (default)")
    mode.add_argument("--full", action="store_true", help="every criterion, grids up to n = 256")
    _common(p)
    return parser


def _write(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _ledger_text(report: dict) -> str:
    lines = [f"delta = {report['delta']}"]
    for w in report["warnings"]:
        lines.append(f"WARNING: {w}")
    lines.append("frequency balance:")
    for row in report["balance"]["rows"]:
        lines.append(f"  {row['name']:<28} {row['exponent']:<14} = {row['value']}")
    t = report["balance"]
    lines.append(f"  {'total':<28} {t['total']['exponent']:<14} = {t['total']['value']}")
    lines.append(f"  {'minimal total':<28} {t['minimal_total']['exponent']:<14} = {t['minimal_total']['value']}")
    lines.append("sharp rows:")
    for row in report["sharp_rows"]:
        lines.append(f"  {row['name']:<28} {row['exponent']:<14} = {row['value']}")
    a = report["amplitude_combination"]
    lines.append(f"  {'amplitude combination':<28} {a['exponent']:<14} = {a['value']}")
    lines.append("counting:")
    for row in report["counting_rows"]:
        tag = "  (clamped at 1)" if row.get("clamped") else ""
        lines.append(f"  {row['name']:<28} {row['exponent']:<14} = {row['value']}{tag}")
    lines.append(f"threshold = {report['threshold']}")
    lines.append(f"gap = {report['gap']}")
    lines.append(f"branch = {report['branch']}")
    gc = report["global_commutator"]
    lines.append(f"global commutator {gc['exponent']} = {gc['value']} (summable: {gc['summable']})")
    lines.append(report["conclusion"])
    return "\n".join(lines) + "\n"


def _config(args, experiment: str) -> hs.SweepConfig:
    kw = {
        k: getattr(args, k)
        for k in (
            "lambdas",
            "delta",
            "trials",
            "seed",
            "grid_rule",
            "samples",
            "k",
            "propagator",
            "chained",
            "grid_n",
            "rho",
            "bump_degree",
            "iters",
            "method",
            "workers",
            "timing",
            "strict",
            "out",
        )
        if hasattr(args, k)
    }
    if experiment == "tile-max":
        kw["lambdas"] = (1,)
    kw["memory_cap"] = int(args.memory_cap_gb * 2**30)
    return hs.SweepConfig(experiment, **kw)


def _violations(cfg: hs.SweepConfig, records) -> list[str]:
    """Invariant checks that turn a finished sweep into exit code 1."""
    bad = []
    for r in records:
        tag = f"{r.experiment} lambda={r.lam} trial={r.trial}"
        if r.error is not None:
            bad.append(f"{tag}: {r.error}")
            continue
        v = dict(r.values)
        e = r.experiment
        if e == "scaling":
            if not v["chain_ok"]:
                bad.append(f"{tag}: multiplier chain bound violated")
            if not v["support_ok"]:
                bad.append(f"{tag}: output support violated")
            if v["ratio"] > float(r.lam) ** float(r.predicted_exponent) * (1 + 1e-12):
                bad.append(f"{tag}: ratio {v['ratio']:.4g} above lambda^{r.predicted_exponent}")
        elif e == "hessian":
            if not v["det_nonzero"]:
                bad.append(f"{tag}: degenerate Hessian block")
            if v["fd_max_rel_error"] > 1e-5:
                bad.append(f"{tag}: finite differences disagree ({v['fd_max_rel_error']:.3g})")
        elif e == "angles":
            if v["null_violations"]:
                bad.append(f"{tag}: |B| > |eta| in {int(v['null_violations'])} samples")
            if v["angle_identity_max"] >= 1e-10:
                bad.append(f"{tag}: angle identity residual {v['angle_identity_max']:.3g}")
            if v["cross_min"] < hs.ph.CROSS_LOWER:
                bad.append(f"{tag}: cross product below {hs.ph.CROSS_LOWER}")
        elif e == "kernel":
            if abs(v["quadrature"] - v["closed_form"]) > 1e-8 * v["closed_form"]:
                bad.append(f"{tag}: quadrature and closed form disagree")
        elif e == "tile-max":
            if v["violations"]:
                bad.append(f"{tag}: tile to max inequality violated")
        elif e == "decoupling":
            if v["ratio"] > math.sqrt(v["cap_count"]) * (1 + 1e-12):
                bad.append(f"{tag}: ratio above sqrt(active pairs)")
    return bad


def _run_experiment(args, experiment: str) -> int:
    cfg = _config(args, experiment)
    fit_needed = experiment == "scaling"
    if fit_needed and len(set(cfg.lambdas)) < 2:
        raise FitError(f"exponent fit needs at least two distinct lambda values, got {sorted(set(cfg.lambdas))}")
    records = hs.run_sweep(cfg)
    text = hs.to_json(records, cfg) if args.json else hs.to_csv(records)
    _write(text, args.out)
    bad = _violations(cfg, records)
    if fit_needed:
        fit = hs.fit_exponent(records)
        pred = float(lg.SCALING_PREDICTION(cfg.delta))
        print(f"fitted slope {fit.slope:.4f} (prediction {pred:g}, residual {fit.residual:.3g})", file=sys.stderr)
        if fit.slope > pred + 0.2:
            bad.append(f"fitted slope {fit.slope:.4f} above {pred:g} + 0.2")
    for line in bad:
        print(f"violation: {line}", file=sys.stderr)
    return EXIT_VIOLATION if bad else EXIT_OK


def _run_ledger(args) -> int:
    report = lg.branch_report(args.delta)
    text = json.dumps(report, indent=2) + "\n" if args.json else _ledger_text(report)
    _write(text, args.out)
    return EXIT_OK


def _run_verify(args) -> int:
    from . import acceptance

    results = acceptance.run_all(full=args.full)
    if args.json:
        text = json.dumps([r.to_json() for r in results], indent=2) + "\n"
    else:
        text = "".join(r.line() + "\n" for r in results)
    _write(text, args.out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_VIOLATION


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "ledger":
            return _run_ledger(args)
        if args.command == "verify-all":
            return _run_verify(args)
        return _run_experiment(args, args.command)
    except OSError as exc:
        print(f"paraudit: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ParauditError as exc:
        print(f"paraudit: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
