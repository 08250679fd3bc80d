"""Command-line front end: parse, certify, truncate, check, report.

Exit codes: 0 all formulas TRUE, 1 some FALSE, 2 some UNKNOWN, >2 errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass

from . import checker, csl, explore, mpm, steady
from .ternary import Ternary


@dataclass
class RunReport:
    model: str
    formula: str
    t_param: float | None
    verdict: Ternary
    interval: checker.ProbInterval | None
    states: int
    depth: float
    epsilon: float
    steady_epsilon: float
    strategy: str
    capped: bool
    time_explore: float
    time_steady: float
    time_check: float


def run(spec: mpm.ModelSpec, text: str, cfg: explore.ExploreConfig,
        steady_epsilon: float, drift_c: float | None = None,
        t_param: float | None = None, model_name: str = "-",
        cert_cache: dict | None = None) -> RunReport:
    """Check one formula against a model and collect the report record."""
    params = {} if t_param is None else {"T": t_param}
    phi = csl.parse_formula(text, spec.names, params=params)

    cert = None
    t_steady = 0.0
    if csl.has_steady(phi):
        key = (steady_epsilon, drift_c)
        t0 = time.perf_counter()
        if cert_cache is not None and key in cert_cache:
            cert = cert_cache[key]
        else:
            cert = steady.build_certificate(
                spec, steady_epsilon, c=drift_c, max_states=cfg.max_states)
            if cert_cache is not None:
                cert_cache[key] = cert
        t_steady = time.perf_counter() - t0

    t0 = time.perf_counter()
    tr, _win = explore.truncate_for(spec, phi, cfg, cert)
    t_explore = time.perf_counter() - t0

    t0 = time.perf_counter()
    res = checker.eval_formula(tr, phi, cert, delta=cfg.transient_delta)
    t_check = time.perf_counter() - t0

    v = checker.verdict_at(res, tr.index[spec.init])
    return RunReport(
        model=model_name, formula=text.strip(), t_param=t_param,
        verdict=v.value, interval=v.interval, states=tr.n_explored,
        depth=tr.depth(), epsilon=cfg.epsilon, steady_epsilon=steady_epsilon,
        strategy=cfg.strategy, capped=tr.capped,
        time_explore=t_explore, time_steady=t_steady, time_check=t_check)


def emit_report(report: RunReport, fmt: str = "text") -> str:
    if fmt == "json-lines":
        rec = {
            "model": report.model,
            "formula": report.formula,
            "t": report.t_param,
            "verdict": str(report.verdict),
            "interval": None if report.interval is None
                        else [report.interval.lo, report.interval.hi],
            "states": report.states,
            "depth": None if math.isinf(report.depth) else int(report.depth),
            "epsilon": report.epsilon,
            "steady_epsilon": report.steady_epsilon,
            "strategy": report.strategy,
            "capped": report.capped,
            "time": {"explore": round(report.time_explore, 3),
                     "steady": round(report.time_steady, 3),
                     "check": round(report.time_check, 3)},
        }
        return json.dumps(rec, sort_keys=True)
    iv = ""
    if report.interval is not None:
        iv = f"  [{report.interval.lo:.6f}, {report.interval.hi:.6f}]"
    t = "" if report.t_param is None else f"  t={report.t_param:g}"
    depth = "inf" if math.isinf(report.depth) else str(int(report.depth))
    capped = "  (state cap hit)" if report.capped else ""
    return (f"{report.verdict}{iv}{t}  eps={report.epsilon:g}  depth={depth}"
            f"  n={report.states}"
            f"  time={report.time_explore + report.time_steady + report.time_check:.1f}s"
            f" (explore {report.time_explore:.1f} / steady {report.time_steady:.1f}"
            f" / check {report.time_check:.1f}){capped}")


def _parse_sweep(text: str) -> list[float]:
    name, _, vals = text.partition("=")
    if name.strip().lower() not in ("t",):
        raise argparse.ArgumentTypeError("sweep must look like t=10,20,60")
    try:
        return [float(v) for v in vals.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("sweep values must be numbers") from None


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mpmcheck",
        description="Three-valued CSL model checking for Markov population models")
    ap.add_argument("model", help="model file (population declarations and transition classes)")
    ap.add_argument("props", help="property file (one formula per line)")
    ap.add_argument("--epsilon", type=float, default=1e-6,
                    help="truncation accuracy for transient exploration (default 1e-6)")
    ap.add_argument("--steady-epsilon", type=float, default=None,
                    help="stationary window tail mass (defaults to --epsilon)")
    ap.add_argument("--auto-epsilon", action="store_true",
                    help="derive epsilon from the outermost probability bound")
    ap.add_argument("--strategy", choices=["advanced", "fsp"], default="advanced")
    ap.add_argument("--no-ap-shortcut", action="store_true",
                    help="disable the decided-state exploration shortcut")
    ap.add_argument("--max-states", type=int, default=2_000_000)
    ap.add_argument("--transient-delta", type=float, default=1e-10,
                    help="uniformisation truncation tolerance")
    ap.add_argument("--drift-c", type=float, default=None,
                    help="manual bound on the drift maximum (skips maximisation)")
    ap.add_argument("--until-bound", type=float, default=None,
                    help="value for the interval parameter T")
    ap.add_argument("--sweep", type=_parse_sweep, default=None, metavar="t=V1,V2,...",
                    help="run each formula for several values of T")
    ap.add_argument("--format", choices=["text", "json-lines"], default="text")
    return ap


def _auto_epsilon(text: str, populations) -> float:
    phi = csl.parse_formula(text, populations, params={"T": 1.0})
    p = None
    if isinstance(phi, (csl.Prob, csl.Steady)):
        p = phi.p
    if p is None:
        return 1e-6
    return min(1e-6, abs(p - 0.5) / 100.0) or 1e-6


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = mpm.load_model(args.model)
    except (OSError, mpm.ModelError) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return 3
    try:
        with open(args.props, "r", encoding="utf-8") as fh:
            lines = [ln.split("#", 1)[0].strip() for ln in fh]
        formulas = [ln for ln in lines if ln]
    except OSError as exc:
        print(f"property error: {exc}", file=sys.stderr)
        return 3
    if not formulas:
        print("property error: no formulas found", file=sys.stderr)
        return 3

    t_values: list[float | None]
    if args.sweep is not None:
        t_values = list(args.sweep)
    elif args.until_bound is not None:
        t_values = [args.until_bound]
    else:
        t_values = [None]

    worst = 0
    cert_cache: dict = {}
    for text in formulas:
        for t_param in t_values:
            epsilon = args.epsilon
            if args.auto_epsilon:
                epsilon = _auto_epsilon(text, spec.names)
                print(f"auto epsilon: {epsilon:g}", file=sys.stderr)
            try:
                cfg = explore.ExploreConfig(
                    epsilon=epsilon,
                    max_states=args.max_states,
                    transient_delta=args.transient_delta,
                    strategy=args.strategy,
                    use_ap_shortcut=not args.no_ap_shortcut)
                report = run(spec, text, cfg,
                             steady_epsilon=args.steady_epsilon or epsilon,
                             drift_c=args.drift_c, t_param=t_param,
                             model_name=args.model, cert_cache=cert_cache)
            except (csl.FormulaError, mpm.ModelError, steady.SteadyError,
                    explore.ExploreError, checker.CheckError) as exc:
                print(f"error: {exc}", file=sys.stderr)
                return 3
            print(emit_report(report, args.format))
            rank = {Ternary.TRUE: 0, Ternary.FALSE: 1, Ternary.UNKNOWN: 2}[report.verdict]
            worst = max(worst, rank)
    return worst


if __name__ == "__main__":
    sys.exit(main())
