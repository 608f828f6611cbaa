"""Command line entry point: ``ellipoet estimate`` and ``ellipoet simulate``."""

import argparse
import logging
import math
import sys

from .clime import conditional_graph_estimate
from .errors import EstimationError
from .io import DataFormatError, read_data, write_matrix
from .poet import ThresholdRule, poet_estimate
from .robust import MEstimatorConfig
from .simulate import ExperimentConfig, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ESTIMATOR = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        return tuple(int(t) for t in text.split(",") if t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _nu(text):
    if text.lower() in ("inf", "infinity"):
        return math.inf
    return float(text)


def _n_rule(text):
    if text in ("half_p", "point6_p"):
        return text
    return _int_list(text)


def build_parser():
    parser = _Parser(prog="ellipoet", description="POET covariance and precision estimation")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    est = sub.add_parser("estimate", help="estimate covariance (and precision) from a data file")
    est.add_argument("--input", required=True)
    est.add_argument("--factors", type=int, required=True)
    est.add_argument("--family", choices=("subgaussian", "elliptical"), default="subgaussian")
    est.add_argument("--tau-const", type=float, default=0.5)
    est.add_argument("--shrinkage", choices=("hard", "soft", "scad"), default="hard")
    est.add_argument("--psd", choices=("none", "clip", "maxnorm-dual"), default=None)
    est.add_argument("--robust", choices=("huber", "catoni"), default="catoni")
    est.add_argument("--out-cov", required=True)
    est.add_argument("--out-precision")
    est.add_argument("--clime-tau-const", type=float, default=0.5)

    sim = sub.add_parser("simulate", help="run a Monte Carlo design and write an error report")
    sim.add_argument("design", choices=("cov", "graph"))
    sim.add_argument("--p", type=_int_list, default=(50, 100, 200))
    sim.add_argument("--n-rule", type=_n_rule, default=None)
    sim.add_argument("--m", type=int, default=3)
    sim.add_argument("--nu", type=_nu, default=4.2)
    sim.add_argument("--reps", type=int, default=50)
    sim.add_argument("--seed", type=int, default=7)
    sim.add_argument("--tau-const", type=float, default=0.5)
    sim.add_argument("--clime-tau-const", type=float, default=0.5)
    sim.add_argument("--shrinkage", choices=("hard", "soft", "scad"), default="hard")
    sim.add_argument("--psd", choices=("none", "clip", "maxnorm-dual"), default=None)
    sim.add_argument("--families", default="subgaussian,elliptical")
    sim.add_argument("--fix-loadings", action="store_true")
    sim.add_argument("--workers", type=int, default=1)
    sim.add_argument("--out", required=True)
    return parser


def _estimate(args):
    try:
        Y = read_data(args.input)
    except (OSError, DataFormatError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    rule = ThresholdRule(shrinkage=args.shrinkage, tau_const=args.tau_const)
    config = MEstimatorConfig(family=args.robust)
    try:
        result = poet_estimate(Y, args.factors, args.family, rule, args.psd, config=config)
        write_matrix(args.out_cov, result.sigma_total)
        if args.out_precision:
            prec = conditional_graph_estimate(
                Y, args.factors, args.family, args.clime_tau_const, args.psd, pilot=result.pilot
            )
            write_matrix(args.out_precision, prec.omega)
            if prec.columns_failed:
                print(f"warning: CLIME columns infeasible: {list(prec.columns_failed)}", file=sys.stderr)
    except (EstimationError, ValueError) as exc:
        print(f"estimator failure: {exc}", file=sys.stderr)
        return EXIT_ESTIMATOR
    if result.threshold_fallback:
        print(f"warning: non-positive residual variances at {list(result.threshold_fallback)}", file=sys.stderr)
    return EXIT_OK


def _simulate(args):
    n_rule = args.n_rule or ("half_p" if args.design == "cov" else "point6_p")
    try:
        config = ExperimentConfig(
            design=args.design,
            p_list=args.p,
            n_rule=n_rule,
            m=args.m,
            nu=args.nu,
            reps=args.reps,
            seed=args.seed,
            tau_const=args.tau_const,
            shrinkage=args.shrinkage,
            psd_mode=args.psd,
            families=tuple(f for f in args.families.split(",") if f),
            clime_tau_const=args.clime_tau_const,
            fix_loadings=args.fix_loadings,
        )
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = run_experiment(config, workers=args.workers)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        report.to_csv(fh)
    if report.failures:
        print(f"{len(report.failures)} replication(s) failed; see comments in {args.out}", file=sys.stderr)
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if args.command == "estimate":
        return _estimate(args)
    return _simulate(args)


if __name__ == "__main__":
    sys.exit(main())
