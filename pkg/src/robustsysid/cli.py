"""Command-line interface: ``simulate``, ``identify`` and ``bench``.

Exit codes: 0 success, 2 usage/validation/I-O error, 3 numerical failure.
"""

import argparse
import json
import math
import sys

import numpy as np

from . import bench
from .baseline import estimate_noise_variance
from .em import EMOptions, run_em
from .estimators import NOISE_CHOICES, make_noise_model
from .exceptions import ConditioningError, DataError, DegenerateInputError, ParameterError, ShapeError
from .noise_models import Grouping, NoiseModel, sample_noise
from .signals import (Dataset, make_rng, random_system, read_dataset_csv, sample_outlier_noise,
                      toeplitz_regressor, write_dataset_csv)

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


def _float_or_inf(x):
    if x is None:
        return None
    return "inf" if math.isinf(x) else float(x)


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def cmd_simulate(args):
    if args.order < 1:
        raise UsageError(f"--order must be >= 1, got {args.order}")
    if args.N < 1 or args.n < 1:
        raise UsageError("--N and --n must be >= 1")
    system = random_system(args.order, args.seed, n=args.n, stream=(0, 0))
    u = make_rng(args.seed, 0, 1).standard_normal(args.N)
    y0 = toeplitz_regressor(u, args.n) @ system.g
    sigma2 = args.noise_fraction * float(np.var(y0))
    kind, nu = bench.parse_scenario(args.scenario)
    if kind == "mixture":
        v = sample_outlier_noise(sigma2, args.outlier_prob, args.N, args.seed, (0, 2))
    else:
        v = sample_noise(NoiseModel.student(sigma2, nu), args.N, args.seed, (0, 2))
    write_dataset_csv(args.output, Dataset(u, y0 + v))
    if args.truth:
        _write_json(args.truth, {
            "g": system.g.tolist(),
            "sigma2": sigma2,
            "config": {"order": args.order, "N": args.N, "n": args.n,
                       "outlier_prob": args.outlier_prob, "noise_fraction": args.noise_fraction,
                       "scenario": args.scenario, "seed": args.seed},
        })
    return EXIT_OK


def cmd_identify(args):
    data = read_dataset_csv(args.input)
    sigma2 = args.sigma2 if args.sigma2 is not None else estimate_noise_variance(data, n=args.n)
    model = make_noise_model(args.noise, sigma2, args.nu)
    grouping = Grouping(data.N, args.groups) if args.groups else None
    options = EMOptions(max_iter=args.max_iter, rel_tol=args.tol, grouping=grouping,
                        track_objective=True)
    est = run_em(data, args.n, model, options)
    _write_json(args.output, {
        "g": est.g_hat.tolist(),
        "lower99": est.lower99.tolist(),
        "upper99": est.upper99.tolist(),
        "lambda": est.theta.lam,
        "beta": est.theta.beta,
        "tau": est.theta.upsilon.tolist(),
        "nu": _float_or_inf(est.nu),
        "sigma2": est.sigma2,
        "iterations": est.n_iter,
        "converged": est.trace.converged,
        "objective_trace": est.trace.objectives,
    })
    return EXIT_OK


def cmd_bench(args):
    methods = tuple(m for m in args.methods.split(",") if m.strip())
    config = bench.BenchConfig(
        runs=args.runs, N=args.N, n=args.n, order=args.order, c=args.outlier_prob,
        noise_fraction=args.noise_fraction, methods=methods, seed=args.seed,
        scenario=args.scenario, sigma2_source=args.sigma2_source, jobs=args.jobs,
        record_timing=not args.no_timing)
    report = bench.run_monte_carlo(config)
    if args.report:
        report.write_csv(args.report)
    summary = report.summary()
    if args.summary:
        report.write_summary(args.summary)
    for m, s in summary["methods"].items():
        print(f"{m:>14s}  mean FIT {100 * s['mean']:6.2f} +- {100 * s['ci95_halfwidth']:.2f}"
              f"  median {100 * s['median']:6.2f}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="robustsysid",
                                     description="Outlier-robust kernel-based system identification")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a random system and a dataset CSV")
    p.add_argument("--order", type=int, default=30)
    p.add_argument("--N", type=int, default=200)
    p.add_argument("--n", type=int, default=50, help="length of the stored true response")
    p.add_argument("--outlier-prob", type=float, default=0.0)
    p.add_argument("--noise-fraction", type=float, default=0.1,
                   help="noise variance relative to the noiseless output variance")
    p.add_argument("--scenario", default="mixture", help="'mixture' or 'student:<nu>'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--truth")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("identify", help="estimate an impulse response from a u,y CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--noise", choices=NOISE_CHOICES, default="student-auto")
    p.add_argument("--nu", type=float)
    p.add_argument("--groups", type=int)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--sigma2", type=float)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("bench", help="Monte Carlo comparison of identification methods")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--N", type=int, default=200)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--order", type=int, default=30)
    p.add_argument("--outlier-prob", type=float, default=0.1)
    p.add_argument("--noise-fraction", type=float, default=0.1)
    p.add_argument("--scenario", default="mixture")
    p.add_argument("--methods", default="em-s,em-l,ss-ml",
                   help="comma list of em-s, em-l, ss-ml, em-s-opt, em-s-fixed:<nu>, em-l-p:<p>")
    p.add_argument("--sigma2-source", choices=("estimated", "true"), default="estimated")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--no-timing", action="store_true",
                   help="write 0 for wall times so reports are byte-identical across runs")
    p.add_argument("--report")
    p.add_argument("--summary")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConditioningError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (UsageError, ParameterError, DataError, ShapeError, DegenerateInputError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
