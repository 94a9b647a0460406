"""Command line entry point: ``preintegrate <subcommand> ...``."""

from __future__ import annotations

import argparse
import csv
import logging
import sys

import numpy as np

from . import activesub, finance, harness, lowdisc, sensitivity, walshlab
from .errors import MonotonicityError, PreintegrateError


def _m_range(text: str):
    lo, sep, hi = text.partition("..")
    return list(range(int(lo), int(hi) + 1)) if sep else [int(lo)]


def _problem(args) -> harness.Problem:
    params = finance.load_params(args.params or args.preset)
    return harness.Problem(params, args.integrand)


def _add_problem_args(p, construction=True):
    p.add_argument("--preset", default="asian50", help="bundled parameter preset (asian50, basketA, basketB)")
    p.add_argument("--params", help="key = value parameter file; overrides --preset")
    p.add_argument("--integrand", default="payoff", help="payoff, delta, gamma, rho, theta, vega or geometric")
    if construction:
        p.add_argument("--construction", default="standard")


def _method_specs(args):
    specs = []
    for kind in args.methods.split(","):
        specs.append(
            harness.MethodSpec(
                kind.strip(),
                args.construction,
                M=args.M,
                centered=args.centered,
                completion=args.completion,
                allow_quad_fallback=args.allow_quad_fallback,
            )
        )
    return specs


def _add_method_args(p):
    p.add_argument("--methods", default=",".join(harness.METHODS))
    p.add_argument("--M", type=int, default=128, help="gradient samples for covariance estimates")
    p.add_argument("--centered", action="store_true")
    p.add_argument(
        "--completion",
        default=activesub.EIGVEC_COMPLEMENT,
        choices=[activesub.EIGVEC_COMPLEMENT, activesub.HOUSEHOLDER],
    )
    p.add_argument("--allow-quad-fallback", action="store_true")


def cmd_rmse(args):
    problem = _problem(args)
    truth = harness.ground_truth(
        problem, n=2**args.truth_m, reps=args.truth_reps, cache_dir=args.cache_dir
    )
    report = harness.rmse_sweep(
        problem, _method_specs(args), _m_range(args.m), args.reps, args.seed, truth.value, args.workers
    )
    summary = report.write(args.out, args.summary)
    w = csv.writer(sys.stdout)
    w.writerow(harness.SUMMARY_COLUMNS)
    for row in report.summary:
        w.writerow([row[c] for c in harness.SUMMARY_COLUMNS])
    print(f"# truth={truth.value:.12g} stderr={truth.stderr:.3g}; rows in {args.out}, summary in {summary}",
          file=sys.stderr)


def cmd_truth(args):
    problem = _problem(args)
    t = harness.ground_truth(
        problem, args.construction, 2**args.m, args.reps, args.seed, cache_dir=args.cache_dir,
        use_cache=not args.no_cache,
    )
    print("integrand,construction,n,reps,value,stderr")
    print(f"{problem.integrand},{t.construction},{t.n},{t.reps},{t.value:.15g},{t.stderr:.6g}")
    if problem.integrand == "geometric":
        print(f"# closed form {finance.geometric_asian_price(problem.params):.15g}", file=sys.stderr)


def cmd_timing(args):
    params = finance.load_params(args.params or args.preset)
    problems = [harness.Problem(params, name) for name in args.integrands.split(",")]
    rows = []
    for construction in args.constructions.split(","):
        args.construction = construction
        rows += harness.timing_run(problems, _method_specs(args), 2**args.m, args.reps, args.seed)
    if args.out:
        harness.write_timing(args.out, rows)
    w = csv.DictWriter(sys.stdout, fieldnames=harness.TIMING_COLUMNS)
    w.writeheader()
    w.writerows(rows)


def cmd_walsh_lab(args):
    res = tuple(int(v) for v in args.resolution.split(","))
    rng = np.random.default_rng(args.seed)
    f = walshlab.DyadicStepFunction.random(res, rng)
    base = lowdisc.generate_sobol(args.m, len(res))
    print("ell,gamma,sigma2,contribution")
    for ell, g, s2, c in walshlab.variance_breakdown(f, base):
        print(f"{'|'.join(map(str, ell))},{g:.12g},{s2:.12g},{c:.12g}")
    pred = walshlab.predicted_variance(f, base)
    print(f"# predicted variance {pred:.12g}")
    if args.reps:
        _, var, se = walshlab.empirical_scramble_variance(f, base, args.reps, args.seed)
        print(f"# empirical variance {var:.12g} +- {se:.3g} over {args.reps} scrambles")


def cmd_sobol_index(args):
    problem = _problem(args)
    f = problem.build(args.construction)
    d = f.dim
    targets = []
    for tok in args.targets.split(","):
        tok = tok.strip()
        if tok == "as":
            C = activesub.estimate_C(f, d, args.M, args.seed + 1)
            targets.append(("as", activesub.rotation_from_C(C).theta))
        else:
            e = np.zeros(d)
            e[int(tok)] = 1.0
            targets.append((f"z{int(tok)}", e))
    print("target,estimate,stderr")
    for name, theta in targets:
        est = sensitivity.jansen_tau_projection(f, theta, n=2**args.m, seed=args.seed, reps=args.reps)
        print(f"{name},{est.tau_upper:.10g},{est.stderr:.4g}")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="preintegrate", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rmse", help="replicated RMSE sweep over n = 2^m")
    _add_problem_args(p)
    _add_method_args(p)
    p.add_argument("--m", default="3..13", help="single m or range lo..hi")
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="report.csv")
    p.add_argument("--summary")
    p.add_argument("--truth-m", type=int, default=17)
    p.add_argument("--truth-reps", type=int, default=30)
    p.add_argument("--cache-dir")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_rmse)

    p = sub.add_parser("truth", help="ground-truth value by replicated high-n estimation")
    _add_problem_args(p, construction=False)
    p.add_argument("--construction", default="pca")
    p.add_argument("--m", type=int, default=17)
    p.add_argument("--reps", type=int, default=30)
    p.add_argument("--seed", type=int, default=20190101)
    p.add_argument("--cache-dir")
    p.add_argument("--no-cache", action="store_true")
    p.set_defaults(func=cmd_truth)

    p = sub.add_parser("timing", help="wall-clock cost per method")
    p.add_argument("--preset", default="asian50")
    p.add_argument("--params")
    p.add_argument("--integrands", default="payoff")
    p.add_argument("--constructions", default="standard,pca")
    _add_method_args(p)
    p.add_argument("--m", type=int, default=15)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_timing)

    p = sub.add_parser("walsh-lab", help="gain coefficients and variance breakdown for a random step function")
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--resolution", default="3,3")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=0, help="scrambles for an empirical check (>= 100)")
    p.set_defaults(func=cmd_walsh_lab)

    p = sub.add_parser("sobol-index", help="upper Sobol' indices of coordinates or the active direction")
    _add_problem_args(p)
    p.add_argument("--targets", default="0,as", help="comma list of zero-based coordinates and/or 'as'")
    p.add_argument("--m", type=int, default=12)
    p.add_argument("--reps", type=int, default=30)
    p.add_argument("--M", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_sobol_index)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except MonotonicityError as exc:
        print(f"error: {exc} (rerun with --allow-quad-fallback to integrate numerically)", file=sys.stderr)
        return 3
    except (PreintegrateError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
