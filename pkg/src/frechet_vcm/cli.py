"""Command-line interface.

Subcommands: simulate, fit, predict, cv, benchmark, convert-histogram.
Exit status is 0 on success, 1 for invalid input or configuration and 2
when the estimator fails numerically on valid input.  Diagnostics go to
standard error; data goes to files or standard output.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .data_io import (
    DatasetSchema,
    histogram_to_quantile,
    load_model,
    read_histograms,
    read_table,
    write_dataset,
    write_model,
    write_points,
    write_results,
)
from .errors import ConfigurationError, NumericalError
from .metric_spaces import QuantileSpace
from .model_selection import DEFAULT_GRID, METHODS, CVConfig, fit_method, modifier_distance_scale, select_bandwidth
from .simulation import RESULT_COLUMNS, DGPConfig, format_table, gen_example, run_benchmark

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2

THREADS_ENV = "FRECHET_VCM_THREADS"

WEIGHT_CHOICES = ("constant", "linear", "ball", "local_constant", "local_linear", "metric_ball")


class _Parser(argparse.ArgumentParser):
    """Argument errors are configuration errors (exit 1), not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _float_list(flag):
    def parse(text):
        try:
            vals = tuple(float(v) for v in text.split(",") if v.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects comma-separated numbers, got {text!r}") from None
        if not vals:
            raise argparse.ArgumentTypeError(f"{flag} is empty")
        return vals
    return parse


def _int_list(flag):
    def parse(text):
        try:
            vals = tuple(int(v) for v in text.split(",") if v.strip())
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects comma-separated integers, got {text!r}") from None
        if not vals:
            raise argparse.ArgumentTypeError(f"{flag} is empty")
        return vals
    return parse


def _method_list(text):
    vals = tuple(v.strip().lower() for v in text.split(",") if v.strip())
    bad = [v for v in vals if v not in METHODS]
    if bad or not vals:
        raise argparse.ArgumentTypeError(f"--methods must list entries of {','.join(METHODS)}, got {text!r}")
    return vals


def _gammas(text):
    vals = _float_list("--gammas")(text)
    if len(vals) != 2:
        raise argparse.ArgumentTypeError(f"--gammas expects two values gamma2,gamma3, got {text!r}")
    return vals


def _positive_int(flag):
    def parse(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{flag} expects an integer, got {text!r}") from None
        if v < 1:
            raise argparse.ArgumentTypeError(f"{flag} must be positive, got {v}")
        return v
    return parse


def _seed(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--seed expects a nonnegative integer, got {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"--seed must be nonnegative, got {v}")
    return v


def resolve_threads(value: int | None) -> int:
    """``--threads`` if given, else ``FRECHET_VCM_THREADS``, else all cores."""
    if value is not None:
        return value
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got {env!r}") from None
        if n < 1:
            raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got {env!r}")
        return n
    return os.cpu_count() or 1


def _add_threads(p):
    p.add_argument("--threads", type=_positive_int("--threads"), default=None,
                   help=f"worker threads (default: ${THREADS_ENV}, else all cores)")


def _add_layout(p):
    p.add_argument("--response", choices=("scalar", "quantile", "spd"),
                   help="response type; checked against the header when given")
    p.add_argument("--m", type=_positive_int("--m"), default=None, help="quantile grid size of the response")
    p.add_argument("--M", type=_positive_int("--M"), default=None, help="matrix size of an SPD response")


def _add_method(p, bandwidth=True):
    p.add_argument("--method", required=True, choices=METHODS, help="estimator")
    p.add_argument("--weights", choices=WEIGHT_CHOICES, default=None,
                   help="localisation in a scalar modifier: constant (default) or linear; "
                        "metric modifiers always use ball weights")
    if bandwidth:
        p.add_argument("--bandwidth", type=float, default=None, help="kernel bandwidth (all methods but gfr)")
    p.add_argument("--ridge", type=float, default=None,
                   help="absolute ridge added to covariance matrices (default: 1e-8 x trace / p)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="frechet-vcm",
                     description="Frechet regression with covariate effects that vary with a modifier, for distributions, SPD matrices and scalars.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", help="draw a training (and test) sample from a simulation design")
    p.add_argument("--example", type=int, required=True, choices=range(1, 7), metavar="{1..6}", help="design number")
    p.add_argument("--n", type=_positive_int("--n"), default=200, help="training sample size")
    p.add_argument("--n-test", type=int, default=0, help="test sample size (0: none)")
    p.add_argument("--gammas", type=_gammas, default=(1.0, 1.0), help="gamma2,gamma3 (default 1,1)")
    p.add_argument("--seed", type=_seed, required=True, help="random seed")
    p.add_argument("--out", required=True, help="training CSV path ('-' for stdout)")
    p.add_argument("--test-out", default=None, help="test CSV path")
    p.add_argument("--truth-out", default=None, help="CSV of noiseless regression values at the test points")

    p = sub.add_parser("fit", help="fit a model and save it as JSON")
    p.add_argument("--data", required=True, help="training CSV")
    _add_layout(p)
    _add_method(p)
    p.add_argument("--lfr-order", type=int, choices=(0, 1), default=1, help="LFR local polynomial order")
    p.add_argument("--model", required=True, help="output model path")

    p = sub.add_parser("predict", help="predict with a saved model")
    p.add_argument("--model", required=True, help="model JSON written by fit")
    p.add_argument("--data", required=True, help="CSV with x and u columns (response columns are ignored)")
    p.add_argument("--out", default="-", help="predictions CSV (default stdout)")
    _add_threads(p)

    p = sub.add_parser("cv", help="choose a bandwidth by k-fold cross-validation")
    p.add_argument("--data", required=True, help="training CSV")
    _add_layout(p)
    _add_method(p, bandwidth=False)
    p.add_argument("--grid", type=_float_list("--grid"), default=DEFAULT_GRID, help="comma-separated bandwidths")
    p.add_argument("--scale-grid", action="store_true",
                   help="multiply the grid by the spread of the pairwise modifier distances")
    p.add_argument("--folds", type=int, default=10, help="number of folds (default 10)")
    p.add_argument("--seed", type=_seed, required=True, help="fold assignment seed")
    p.add_argument("--out", default="-", help="per-bandwidth table CSV (default stdout)")
    _add_threads(p)

    p = sub.add_parser("benchmark", help="Monte-Carlo comparison of the estimators on a design")
    p.add_argument("--example", type=int, required=True, choices=range(1, 7), metavar="{1..6}", help="design number")
    p.add_argument("--gammas", type=_gammas, default=(1.0, 1.0), help="gamma2,gamma3 (default 1,1)")
    p.add_argument("--n", type=_int_list("--n"), default=(50, 100, 200), help="training sizes, comma-separated")
    p.add_argument("--methods", type=_method_list, default=METHODS, help="comma-separated subset of gfr,lfr,pfr,vfr")
    p.add_argument("--reps", type=_positive_int("--reps"), default=50, help="replications (default 50)")
    p.add_argument("--seed", type=_seed, required=True, help="master seed")
    p.add_argument("--n-test", type=_positive_int("--n-test"), default=1000, help="test sample size")
    p.add_argument("--folds", type=int, default=10, help="cross-validation folds")
    p.add_argument("--grid", type=_float_list("--grid"), default=DEFAULT_GRID, help="bandwidth grid")
    p.add_argument("--weights", choices=WEIGHT_CHOICES, default=None, help="localisation for a scalar modifier")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--scale-grid", dest="scale_grid", action="store_const", const=True, default=None,
                   help="always scale the grid by the modifier spread (default: only for metric modifiers)")
    g.add_argument("--no-scale-grid", dest="scale_grid", action="store_const", const=False,
                   help="never scale the grid")
    p.add_argument("--against-truth", action="store_true",
                   help="score predictions against the noiseless regression function")
    p.add_argument("--out", default=None, help="results CSV")
    _add_threads(p)

    p = sub.add_parser("convert-histogram", help="turn histograms into quantile functions")
    p.add_argument("--data", required=True, help="CSV with header id,lower,upper,count")
    p.add_argument("--m", type=_positive_int("--m"), default=20, help="quantile grid size (default 20)")
    p.add_argument("--prefix", default="y", help="column prefix of the output (y or u)")
    p.add_argument("--out", default="-", help="output CSV (default stdout)")
    return parser


# --------------------------------------------------------------------------
# commands


def _declared_schema(args, found: DatasetSchema) -> DatasetSchema:
    """Check --response/--m/--M against the layout read from the header."""
    if args.response is not None and args.response != found.response_type:
        raise ConfigurationError(f"--response {args.response} does not match the data header "
                                 f"({found.response_type} response)")
    if args.m is not None and found.response_type == "quantile" and args.m != found.response_dim:
        raise ConfigurationError(f"--m {args.m} does not match the {found.response_dim} quantile columns in the data")
    if args.M is not None and found.response_type == "spd" and args.M != found.response_dim:
        raise ConfigurationError(f"--M {args.M} does not match the {found.response_dim}x{found.response_dim} "
                                 f"response matrices in the data")
    return found


def _load_training(args):
    table = read_table(args.data, require_response=True)
    _declared_schema(args, table.schema)
    return table.training_set(), table.schema


def cmd_simulate(args) -> int:
    g2, g3 = args.gammas
    cfg = DGPConfig.for_example(args.example, n_train=args.n, n_test=args.n_test, gamma2=g2, gamma3=g3, seed=args.seed)
    data = gen_example(cfg)
    write_dataset(args.out, data.train)
    if args.test_out:
        if args.n_test < 1:
            raise ConfigurationError("--test-out needs --n-test > 0")
        write_dataset(args.test_out, data.test)
    if args.truth_out:
        if args.n_test < 1:
            raise ConfigurationError("--truth-out needs --n-test > 0")
        write_points(args.truth_out, data.truth, data.test.response_space)
    return EXIT_OK


def cmd_fit(args) -> int:
    training, schema = _load_training(args)
    if args.method != "gfr" and args.bandwidth is None:
        raise ConfigurationError(f"--bandwidth is required for --method {args.method}")
    model = fit_method(args.method, training, args.bandwidth, args.weights, ridge=args.ridge,
                       lfr_order=args.lfr_order)
    write_model(args.model, model, schema)
    return EXIT_OK


def cmd_predict(args) -> int:
    model, schema = load_model(args.model)
    table = read_table(args.data, require_response=False)
    if table.schema.p != schema.p or table.schema.modifier_type != schema.modifier_type \
            or table.schema.modifier_dim != schema.modifier_dim:
        raise ConfigurationError(
            f"{args.data}: predictor/modifier columns do not match the model "
            f"(expected {','.join(schema.header(with_response=False))})"
        )
    try:
        pred = model.predict_batch(table.X, table.U, threads=resolve_threads(args.threads))
    except NumericalError as exc:
        if exc.index is not None:
            raise type(exc)(f"{args.data}, data row {exc.index + 1}: {exc.message}") from None
        raise
    write_points(args.out, pred, model.training.response_space)
    return EXIT_OK


def cmd_cv(args) -> int:
    training, _ = _load_training(args)
    if args.method == "gfr":
        raise ConfigurationError("--method gfr has no bandwidth to select")
    config = CVConfig(args.grid, args.folds, args.seed)
    if args.scale_grid:
        config = config.scaled(modifier_distance_scale(training))
    res = select_bandwidth(training, args.method, args.weights, config, ridge=args.ridge,
                           threads=resolve_threads(args.threads))
    rows = [{"bandwidth": float(h), "cv_error": float(e), "failed_folds": int(f),
             "selected": int(h == res.bandwidth)}
            for h, e, f in zip(res.grid, res.errors, res.failures)]
    write_results(args.out, rows, ("bandwidth", "cv_error", "failed_folds", "selected"))
    print(f"selected bandwidth: {res.bandwidth!r}", file=sys.stderr)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cv = CVConfig(args.grid, args.folds, 0)
    rows = run_benchmark(args.example, n_train=args.n, gammas=args.gammas, methods=args.methods,
                         reps=args.reps, seed=args.seed, n_test=args.n_test, cv=cv, weights=args.weights,
                         threads=resolve_threads(args.threads), scale_grid=args.scale_grid,
                         against_truth=args.against_truth)
    if args.out:
        write_results(args.out, rows, RESULT_COLUMNS)
    print(format_table(rows))
    return EXIT_OK


def cmd_convert_histogram(args) -> int:
    hists = read_histograms(args.data)
    Q = np.array([histogram_to_quantile(h, args.m).values for _, h in hists])
    write_points(args.out, Q, QuantileSpace(args.m), prefix=args.prefix, ids=[i for i, _ in hists])
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "cv": cmd_cv,
    "benchmark": cmd_benchmark,
    "convert-histogram": cmd_convert_histogram,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except ConfigurationError as exc:
        print(f"frechet-vcm {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"frechet-vcm {args.command}: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
