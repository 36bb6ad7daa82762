"""Command-line interface.

Exit codes: 0 success, 1 failed check, 2 usage or input error,
3 violated mathematical hypothesis (e.g. constant response).
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import __version__
from .checkerboard import random_checkerboard
from .ingest import IngestError, TiePolicy, read_csv, read_table
from .measures import MeasureResult, NormalizerNotPositive, estimate, lambda_phi, lambda_phi_oracle
from .models import parse_model, true_lambda
from .phi import SIMULATION_PHIS, ConvexityError, parse_phi
from .simharness import ConfigError, SimulationError, compute_truths, emit, load_config, run, summarize

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_HYPOTHESIS = 0, 1, 2, 3

DEFAULT_S = 0.5
DEFAULT_QUAD = 16


class _Formatter(argparse.ArgumentDefaultsHelpFormatter):
    pass


def _phi_arg(quad_order):
    def parse(text):
        try:
            f = parse_phi(text, quad_order=quad_order)
            f.validate()
        except (ValueError, ConvexityError) as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
        return f
    return parse


def _add_common(p, seed=True):
    p.add_argument("--s", type=float, default=DEFAULT_S, help="resolution exponent, N = floor(n**s)")
    if seed:
        p.add_argument("--seed", type=int, default=0, help="seed for random tie-breaking")
    p.add_argument("--tie-policy", choices=[t.value for t in TiePolicy],
                   default=TiePolicy.SEEDED_JITTER.value, help="tie handling for ranks")
    p.add_argument("--drop-incomplete", action="store_true", default=False,
                   help="skip rows with missing values instead of failing")
    p.add_argument("--quad-order", type=int, default=DEFAULT_QUAD,
                   help="Gauss-Legendre order for custom convex functions")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dirdep", description=__doc__.splitlines()[0],
                                     formatter_class=_Formatter)
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", default=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", formatter_class=_Formatter,
                       help="checkerboard estimate of Lambda_phi(Y|X) from a CSV file")
    p.add_argument("csv", help="input file; a non-numeric first row is read as a header")
    p.add_argument("--x-col", default="0", help="name or 0-based index of X")
    p.add_argument("--y-col", default="1", help="name or 0-based index of Y")
    p.add_argument("--phi", default="abs^p:2", help="abs^p:P, expsgn:C or expabs:C")
    _add_common(p)

    p = sub.add_parser("rank", formatter_class=_Formatter,
                       help="rank exogenous columns by their estimated Lambda_phi")
    p.add_argument("csv", help="headed input file; every other column is exogenous")
    p.add_argument("--y-col", required=True, help="endogenous column")
    p.add_argument("--phi", action="append", default=None,
                   help="convex function (repeatable); default abs^p:1, expabs:1, expsgn:1")
    _add_common(p)

    p = sub.add_parser("true-value", formatter_class=_Formatter,
                       help="reference Lambda_phi of an analytic copula")
    p.add_argument("model", help="indep, como, counter, mo:A,B, fgm:T or frechet:A")
    p.add_argument("phi")
    p.add_argument("n_fine", type=int, nargs="?", default=2048,
                   help="checkerboard resolution (power of two >= 128)")

    p = sub.add_parser("simulate", formatter_class=_Formatter,
                       help="run a Monte Carlo study from a key=value config")
    p.add_argument("config", help="key=value file: models, phis, sample_sizes, ...")
    p.add_argument("out_dir", help="directory for records.csv, summary.csv and SVG plots")
    p.add_argument("--workers", type=int, default=None, help="override the config's worker count")
    p.add_argument("--reps", type=int, default=None,
                   help="override replications (config default 100)")
    p.add_argument("--full", action="store_true", default=False,
                   help="use 1000 replications as in the original study")
    p.add_argument("--no-truth", action="store_true", default=False,
                   help="skip computing reference values")

    p = sub.add_parser("oracle-check", formatter_class=_Formatter,
                       help="compare exact Lambda_phi with the brute-force oracle")
    p.add_argument("--cases", type=int, default=50)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--max-n", type=int, default=24, help="largest checkerboard resolution")
    p.add_argument("--grid", type=int, default=800, help="midpoint lattice size")
    p.add_argument("--tol", type=float, default=2e-3)
    return parser


# ---------------------------------------------------------------------- #

def cmd_estimate(args, out) -> int:
    f = _phi_arg(args.quad_order)(args.phi)
    sample = read_csv(args.csv, args.x_col, args.y_col, drop_incomplete=args.drop_incomplete)
    res = estimate(sample, f, s=args.s, seed=args.seed, tie_policy=args.tie_policy)
    print(MeasureResult.CSV_HEADER, file=out)
    print(res.csv_row(), file=out)
    return EXIT_OK


def cmd_rank(args, out) -> int:
    parse = _phi_arg(args.quad_order)
    phis = [parse(p) for p in (args.phi or ["abs^p:1", "expabs:1", "expsgn:1"])]
    table = read_table(args.csv, args.y_col, drop_incomplete=args.drop_incomplete)
    if not table.exogenous:
        raise IngestError("need at least one exogenous column")
    print("variable," + MeasureResult.CSV_HEADER, file=out)
    orders = {}
    for f in phis:
        scored = []
        for col in table.exogenous:
            res = estimate(table.pair(col), f, s=args.s, seed=args.seed, tie_policy=args.tie_policy)
            scored.append((res.value, col))
            print(f"{col},{res.csv_row()}", file=out)
        # stable: ties keep column order
        orders[f.descriptor] = [c for _, c in sorted(scored, key=lambda t: -t[0])]
    print(file=out)
    print("phi,ordering", file=out)
    for desc, order in orders.items():
        print(f"{desc},{' > '.join(order)}", file=out)
    same = len({tuple(o) for o in orders.values()}) == 1
    print(f"orderings_coincide,{str(same).lower()}", file=out)
    return EXIT_OK


def cmd_true_value(args, out) -> int:
    model = parse_model(args.model)
    f = _phi_arg(DEFAULT_QUAD)(args.phi)
    tv = true_lambda(model, f, args.n_fine)
    print("model,phi,N,value,error_bound,converged,closed_form", file=out)
    closed = "" if tv.closed_form is None else repr(tv.closed_form)
    print(f'"{model.descriptor}",{f.descriptor},{tv.N},{tv.value!r},{tv.error_bound!r},'
          f"{str(tv.converged).lower()},{closed}", file=out)
    return EXIT_OK if tv.converged else EXIT_CHECK


def cmd_simulate(args, out) -> int:
    reps = 1000 if args.full else args.reps
    cfg = load_config(args.config, workers=args.workers, replications=reps)
    records = run(cfg)
    truths = {} if args.no_truth else compute_truths(cfg)
    summaries = summarize(records, truths)
    for path in emit(records, summaries, args.out_dir):
        print(path, file=out)
    return EXIT_OK


def cmd_oracle_check(args, out) -> int:
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    worst_case = None
    for case in range(args.cases):
        N = int(rng.integers(2, args.max_n + 1))
        cb = random_checkerboard(N, rng)
        for f in SIMULATION_PHIS:
            gap = abs(lambda_phi(cb, f).value - lambda_phi_oracle(cb, f, args.grid))
            if gap > worst:
                worst, worst_case = gap, (case, N, f.descriptor)
    print(f"cases,{args.cases}", file=out)
    print(f"max_discrepancy,{worst!r}", file=out)
    if worst_case:
        print(f"worst_case,case={worst_case[0]} N={worst_case[1]} phi={worst_case[2]}", file=out)
    if worst >= args.tol:
        print(f"oracle disagreement {worst:.3g} exceeds {args.tol:g}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


COMMANDS = {
    "estimate": cmd_estimate,
    "rank": cmd_rank,
    "true-value": cmd_true_value,
    "simulate": cmd_simulate,
    "oracle-check": cmd_oracle_check,
}


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, out)
    except NormalizerNotPositive as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (IngestError, ConfigError, ValueError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECK


if __name__ == "__main__":
    sys.exit(main())
