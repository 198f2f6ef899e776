"""Command-line entry point ``overspec-mda``.

Exit codes: 0 when every check passes, 1 when a check fails, 2 for usage or
configuration errors (including violated initialization radii), 3 for
numerical or domain errors.
"""

from __future__ import annotations

import argparse
import json
import sys

from ._version import __version__
from .errors import InvalidArgumentError, NumericalDomainError, OverspecError, PreconditionError
from .experiments import EXPERIMENTS, build_config, read_config_file, run_experiment, write_outputs

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2, 3

_HELP = {
    "pop-trace": "population EM KL trace versus iteration",
    "kl-vs-n": "final sample-EM KL versus sample size",
    "mda-error": "MDA excess risk versus training size",
    "perturbation": "sup |m_n - m| versus sample size",
    "properties": "structural checks of m and ell on a grid",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", metavar="FILE", help="key = value file; flags override it")
    p.add_argument("--d", metavar="INT[,INT...]", help="dimension(s)")
    p.add_argument("--p", metavar="FLOAT[,FLOAT...]", help="mixture weight(s) in (1/2, 1)")
    p.add_argument("--theta0", metavar="CSV", help="starting vector, or a single norm")
    p.add_argument("--n-list", metavar="CSV", help="sample sizes")
    p.add_argument("--seeds", type=int, help="seeds per sample size")
    p.add_argument("--reps", type=int, help="replications per sample size")
    p.add_argument("--delta", type=float, help="tail probability for the iteration budget")
    p.add_argument("--alpha", type=float, help="rate parameter recorded with the budget")
    p.add_argument("--quad-order", type=int, help="Gauss-Hermite order")
    p.add_argument("--iterations", type=int, help="population EM steps (pop-trace)")
    p.add_argument("--radius", type=float, help="upper end r of the theta grid (perturbation)")
    p.add_argument("--grid-size", type=int, help="grid points")
    p.add_argument("--n-test", type=int, help="fresh test points (mda-error)")
    p.add_argument("--base-seed", type=int, help="root seed of all random streams")
    p.add_argument("--jobs", type=int, help="worker threads for replications")
    p.add_argument("--strict-radius", action="store_true", default=None, help="fail on starts outside the radius")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--plot", action="store_true", default=None, help="also write an SVG plot")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="overspec-mda", description="Overspecified MDA experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="experiment", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True
    for name in EXPERIMENTS:
        _common(sub.add_parser(name, help=_HELP[name], description=_HELP[name]))
    return parser


def _flags(args) -> dict:
    return {
        "d": args.d,
        "p": args.p,
        "theta0": args.theta0,
        "n_list": args.n_list,
        "seeds": args.seeds,
        "replications": args.reps,
        "delta": args.delta,
        "alpha": args.alpha,
        "quadrature_order": args.quad_order,
        "iterations": args.iterations,
        "radius": args.radius,
        "grid_size": args.grid_size,
        "n_test": args.n_test,
        "base_seed": args.base_seed,
        "jobs": args.jobs,
        "strict_radius": args.strict_radius,
        "output_dir": args.out,
        "plot": args.plot,
    }


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = build_config(args.experiment, file_values, **_flags(args))
        result = run_experiment(cfg)
        paths = write_outputs(result)
    except (InvalidArgumentError, PreconditionError) as exc:
        print(f"overspec-mda: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericalDomainError, ArithmeticError) as exc:
        print(f"overspec-mda: numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OverspecError as exc:
        print(f"overspec-mda: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    for name, ok in result.checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    print(json.dumps({k: str(v) for k, v in paths.items()}, sort_keys=True))
    return EXIT_OK if result.passed else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
