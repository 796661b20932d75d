"""``gofmult`` command line.

Exit codes: 0 success, 1 usage error, 2 fit failure, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from ..errors import FIT_ERRORS, ReplicateFailure
from ..gof import STATISTICS
from ..registry import get_family
from .checks import run_gradient_check, run_timing
from .csvio import CsvParseError, read_csv
from .experiment import ExperimentConfig, run_experiment
from .single import run_single

EXIT_OK, EXIT_USAGE, EXIT_FIT, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("gofmult")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _stat(text):
    from ..gof import normalize_statistic

    try:
        return normalize_statistic(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser():
    p = _Parser(prog="gofmult", description="Multiplier and parametric-bootstrap goodness-of-fit tests.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("test", help="test one family on a CSV data file")
    t.add_argument("data", help="numeric CSV, one observation per row")
    t.add_argument("--family", required=True, help="e.g. norm, t5, logis, gamma, weibull, mvnorm, mvt5, nc, gn, t5n")
    t.add_argument("--stat", type=_stat, default="Sn*", help=f"one of {', '.join(STATISTICS)} (or sn, tn, snstar, tnstar)")
    t.add_argument("--method", type=str.upper, choices=["MP", "PB"], default="MP")
    t.add_argument("--nrep", type=int, default=1000, help="number of replicates N (at least 100)")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--weights", choices=["normal", "rademacher"], default="normal")
    t.add_argument("--analytic", action="store_true", help="analytic gradients for multivariate t")
    t.add_argument("--report", help="JSON report path (default: <data>.gof.json)")

    s = sub.add_parser("study", help="run a Monte Carlo level/power study")
    s.add_argument("--config", required=True, help="JSON or TOML experiment configuration")
    s.add_argument("--out", default="study-out", help="output directory for CSV and JSON manifest")
    s.add_argument("--stem", default="experiment")

    g = sub.add_parser("gradcheck", help="analytic vs numeric multivariate-t gradients")
    g.add_argument("--family", required=True, help="mvt<nu>, e.g. mvt5")
    g.add_argument("--dim", type=int, default=2)
    g.add_argument("--trials", type=int, default=100)
    g.add_argument("--seed", type=int, default=0)

    b = sub.add_parser("bench", help="wall times of MP and PB on one data set")
    b.add_argument("data", nargs="?", help="CSV file; simulated from --family when omitted")
    b.add_argument("--family", required=True)
    b.add_argument("--dim", type=int, default=None)
    b.add_argument("--n", type=int, default=1262, help="sample size when simulating")
    b.add_argument("--nrep", type=int, default=1000)
    b.add_argument("--pb-replicates", type=int, default=None,
                   help="run only this many PB replicates and scale to --nrep")
    b.add_argument("--seed", type=int, default=0)
    return p


def _cmd_test(args):
    result, path = run_single(args.data, args.family, args.stat, args.method, args.nrep, args.seed,
                              args.analytic, args.weights, args.report)
    print(f"family     {result.family}")
    print(f"statistic  {result.statistic}")
    print(f"method     {result.method}")
    print(f"observed   {result.observed:.6g}")
    print(f"p-value    {result.pvalue:.4f}")
    print(f"N          {result.N}")
    print(f"time       {result.wall_time:.3f} s")
    print(f"report     {path}")
    return EXIT_OK


def _cmd_study(args):
    config = ExperimentConfig.load(args.config)
    report = run_experiment(config)
    csv_path, json_path = report.write(args.out, args.stem)
    header, rows = report.table()
    print(",".join(header))
    for row in rows:
        print(",".join(str(row.get(h, "")) for h in header))
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK


def _cmd_gradcheck(args):
    family = get_family(args.family, args.dim)
    report = run_gradient_check(family, args.trials, args.seed)
    print(json.dumps(report.as_dict(), indent=2))
    return EXIT_OK if report.passed else EXIT_FIT


def _cmd_bench(args):
    from ..rng import stream

    if args.data:
        data = read_csv(args.data)
        family = get_family(args.family, data.shape[1])
    else:
        family = get_family(args.family, args.dim or 1)
        start = family.moment_start(family.sample(_default_truth(family), 50, stream(args.seed, 1)))
        data = family.sample(start, args.n, stream(args.seed, 2))
    report = run_timing(family, data, args.nrep, seed=args.seed, pb_replicates=args.pb_replicates)
    print(json.dumps(report.as_dict(), indent=2))
    return EXIT_OK


def _default_truth(family):
    import numpy as np

    if hasattr(family, "pack"):
        d = family.dim
        return family.pack(np.zeros(d), np.ones(d), 0.5 * np.eye(d) + 0.5)
    starts = {"norm": [0.0, 1.0], "logis": [0.0, 1.0], "gamma": [2.0, 1.0], "weibull": [1.5, 1.0]}
    if family.name in starts or family.name.startswith("t") and family.dim == 1:
        return np.array(starts.get(family.name, [0.0, 1.0]))
    raise ValueError(f"no default simulation law for {family.name}; pass a data file")


COMMANDS = {"test": _cmd_test, "study": _cmd_study, "gradcheck": _cmd_gradcheck, "bench": _cmd_bench}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CsvParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (*FIT_ERRORS, ReplicateFailure) as exc:
        print(f"fit failure ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_FIT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
