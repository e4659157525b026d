"""Command line: ``pcadual {check,measure,correlate,simulate}``.

Every command prints one JSON report on stdout.  Exit codes: 0 success,
2 parse/configuration error, 3 certification error (not class C, or D >= 1),
4 resource budget exceeded.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from datetime import datetime, timezone

from . import __version__
from .analysis import correlation_curve, curve_csv, decay_constants, dobrushin_report
from .cylinder import Pattern, decompose, measure
from .dual import (
    DEFAULT_TRUNCATION,
    STATE_BUDGET,
    AutoProvider,
    ClosedFormProvider,
    ExactProvider,
    MonteCarloProvider,
    closed_form_measure,
    dual_kernel,
)
from .errors import CertificationError, PCAError
from .lattice import estimate_frequency
from .model import check_class, format_subset
from .modelfile import load_model


def _finite(obj):
    # JSON has no inf/nan
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def _class_dict(report) -> dict:
    nb = report.neighborhood
    return {
        "is_class_C": report.is_class_C,
        "ergodic": report.ergodic,
        "D": report.D,
        "gamma": report.gamma,
        "lambda": {format_subset(nb, m): w for m, w in report.lambdas.weights.items()},
        "violations": [{"subset": format_subset(nb, m), "lambda": w} for m, w in report.violations],
    }


def _provider(table, args):
    kind = closed_form_measure(table)
    if kind is not None:
        return ClosedFormProvider(kind), kind.value
    report = check_class(table)
    if not report.is_class_C:
        bad = ", ".join(repr(format_subset(report.neighborhood, m)) for m, _ in report.violations)
        raise CertificationError(f"model is not in class C (lambda out of [0, 1) at {bad})", report)
    kernel = dual_kernel(table)
    if args.method == "exact":
        return ExactProvider(kernel, args.truncation, args.budget), None
    if args.method == "mc":
        return MonteCarloProvider(kernel, args.replicas, args.seed), None
    return AutoProvider(kernel, args.truncation, args.replicas, args.seed, args.budget), None


def _terms(comb, provider) -> list:
    out = []
    for a, Y in comb.terms:
        out.append({"coefficient": a, "set": [list(s) for s in Y.sites], "mu_hat": provider(Y).as_dict()})
    return out


def cmd_check(args, model, table) -> tuple[dict, int]:
    report = check_class(table)
    res = _class_dict(report)
    kind = closed_form_measure(table)
    res["closed_form"] = kind.value if kind else None
    res["dobrushin"] = dobrushin_report(table).as_dict()
    code = 0 if (report.ergodic or kind is not None) else 3
    return res, code


def cmd_measure(args, model, table) -> tuple[dict, int]:
    pattern = Pattern.parse(args.pattern, model.dimension)
    provider, kind = _provider(table, args)
    comb = decompose(pattern)
    est = measure(comb, provider)
    return {
        "pattern": pattern.text(),
        "closed_form": kind,
        "terms": len(comb.terms),
        "distinct_sets": len({Y.canonical() for _, Y in comb.terms}),
        "decomposition": _terms(comb, provider),
        "measure": est.as_dict(),
    }, 0


def cmd_correlate(args, model, table) -> tuple[dict, int]:
    U = Pattern.parse(args.U, model.dimension)
    V = Pattern.parse(args.V, model.dimension)
    provider, kind = _provider(table, args)
    points = correlation_curve(table, U, V, args.tmin, args.tmax, provider)
    csv_text = curve_csv(points)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(csv_text)
    res = {"U": U.text(), "V": V.text(), "closed_form": kind, "constants": None}
    if kind is None:
        c = decay_constants(decompose(U), decompose(V), table.D, table.neighborhood.radius)
        res["constants"] = {"a": c.a, "F": c.F, "K": c.K, "D": c.D, "r": c.r}
    res["points"] = [
        dict(p.row(), below_resolution=p.below_resolution, within_envelope=(
            None if p.envelope is None else p.value <= p.envelope + p.error))
        for p in points
    ]
    res["csv"] = csv_text
    return res, 0


def cmd_simulate(args, model, table) -> tuple[dict, int]:
    pattern = Pattern.parse(args.pattern, model.dimension)
    provider, kind = _provider(table, args)
    freq = estimate_frequency(
        table, pattern, args.L, args.burnin, args.samples, args.thin, args.seed, dump_pbm=args.dump_pbm
    )
    res = {"pattern": pattern.text(), "frequency": freq.as_dict(), "dual": None, "comparison": None}
    dual = measure(decompose(pattern), provider)
    res["dual"] = dual.as_dict()
    sigma = math.hypot(freq.stat_error, dual.stat_error / 3.0)
    diff = abs(freq.value - dual.value)
    res["comparison"] = {
        "difference": diff,
        "sigma": sigma,
        "tolerance": 3.0 * sigma + dual.det_error,
        "pass": diff <= 3.0 * sigma + dual.det_error,
    }
    return res, 0


COMMANDS = {
    "check": cmd_check,
    "measure": cmd_measure,
    "correlate": cmd_correlate,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pcadual", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def model_arg(p):
        p.add_argument("model", help="model JSON file, or - for stdin")

    def method_args(p):
        p.add_argument("--method", choices=["exact", "mc", "auto"], default="auto")
        p.add_argument("--truncation", type=int, default=DEFAULT_TRUNCATION, metavar="N")
        p.add_argument("--replicas", type=int, default=10**5, metavar="R")
        p.add_argument("--seed", type=int, default=0, metavar="S")
        p.add_argument("--budget", type=int, default=STATE_BUDGET, help="exact DP state budget")

    p = sub.add_parser("check", help="class-C certificate, D, gamma")
    model_arg(p)

    p = sub.add_parser("measure", help="invariant measure of a cylinder")
    model_arg(p)
    p.add_argument("pattern", help="e.g. 01@0, or 0:0=1,1:0=0 in d = 2")
    method_args(p)

    p = sub.add_parser("correlate", help="correlation curve with the decay envelope")
    model_arg(p)
    p.add_argument("U")
    p.add_argument("V")
    p.add_argument("--tmin", type=int, required=True)
    p.add_argument("--tmax", type=int, required=True)
    p.add_argument("--csv", metavar="PATH", help="also write t,corr,err,envelope rows here")
    method_args(p)

    p = sub.add_parser("simulate", help="forward lattice simulation vs the dual measure")
    model_arg(p)
    p.add_argument("pattern")
    p.add_argument("--L", type=int, default=4096)
    p.add_argument("--burnin", type=int, default=None)
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--dump-pbm", metavar="PATH", default=None)
    method_args(p)
    return ap


def run(argv: list[str]) -> tuple[dict | None, int, str | None]:
    """Execute a command; returns (report, exit code, error message)."""
    args = build_parser().parse_args(argv)
    try:
        model = load_model(args.model)
        table = model.build()
        results, code = COMMANDS[args.command](args, model, table)
    except PCAError as e:
        return None, e.exit_code, f"{type(e).__name__}: {e}"
    report = {
        "command": list(argv),
        "model_digest": model.digest(),
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "results": _finite(results),
    }
    return report, code, None


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    report, code, err = run(argv)
    if err:
        print(f"pcadual: {err}", file=sys.stderr)
    if report is not None:
        sys.stdout.write(json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
