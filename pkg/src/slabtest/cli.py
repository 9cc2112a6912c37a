"""Command line interface: ``slabtest {analyze,simulate,curves,diagnose}``."""

import argparse
import math
import sys

import numpy as np

from slabtest import __version__
from slabtest.exceptions import ConfigError, DomainError
from slabtest.io import (
    default_workers,
    emit,
    outcome_to_dict,
    parse_config,
    read_observations,
    write_csv,
)
from slabtest.mmle import universal_lower_bound
from slabtest.moments import MomentContext
from slabtest.priors import KNOWN_PRIORS, parse_prior
from slabtest.procedures import PROCEDURES, BatchAnalysis
from slabtest.simulation import figure_cells, sweep
from slabtest.thresholds import ThresholdContext

FIGURES = ("1", "2", "3", "4", "sc", "sc-table")


class CliError(Exception):
    def __init__(self, kind, message):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


def parse_grid(spec):
    """``log:a:b:k`` (k points from 10^a to 10^b), ``lin:a:b:k`` or ``v1,v2,...``."""
    try:
        if spec.startswith(("log:", "lin:")):
            kind, a, b, k = spec.split(":")
            a, b, k = float(a), float(b), int(k)
            if k < 1:
                raise ValueError
            grid = np.logspace(a, b, k) if kind == "log" else np.linspace(a, b, k)
        else:
            grid = np.array([float(v) for v in spec.split(",") if v.strip()])
    except ValueError:
        raise CliError("invalid-grid", f"cannot parse grid {spec!r}; use log:a:b:k, lin:a:b:k or a comma list") from None
    if grid.size == 0 or not np.all(np.isfinite(grid)):
        raise CliError("invalid-grid", f"grid {spec!r} is empty or not finite")
    return grid


def _prior(name):
    try:
        return parse_prior(name)
    except DomainError as exc:
        raise ConfigError("unknown-prior", str(exc)) from None


def _level(t, procedure):
    upper = 0.5 if procedure == "mci" else 1.0
    if not (0 < t < upper):
        raise ConfigError("invalid-t", f"--t = {t!r} is not in (0, {upper:g}) for {procedure}")
    return t


def _workers(value):
    workers = default_workers() if value is None else value
    if workers < 1:
        raise ConfigError("invalid-workers", f"--workers must be >= 1, got {workers}")
    return workers


def cmd_analyze(args):
    prior = _prior(args.prior)
    _level(args.t, args.procedure)
    x = read_observations(args.input)
    lower = None
    if args.lower == "universal":
        lower = universal_lower_bound(prior, x.size)
    analysis = BatchAnalysis(prior, x, w=args.w, lower=lower)
    outcome = analysis.run(args.procedure, args.t, args.L)
    doc = outcome_to_dict(outcome, prior=prior.id, n=x.size)
    emit(doc, "json", args.output)


def _run_sweep(cells, workers, output, quiet):
    def progress(done, total):
        if not quiet:
            print(f"slabtest: cell {done}/{total}", file=sys.stderr)

    rows = sweep(cells, workers=workers, progress=progress)
    emit(rows, "csv", output)


def cmd_simulate(args):
    try:
        with open(args.config) as fh:
            text = fh.read()
    except OSError as exc:
        raise OSError(f"cannot read {args.config}: {exc.strerror}") from None
    config = parse_config(text)
    cells = config.cells
    if args.seed is not None or args.reps is not None:
        from dataclasses import replace

        cells = [
            replace(
                c,
                seed=c.seed if args.seed is None else args.seed,
                reps=c.reps if args.reps is None else args.reps,
            )
            for c in cells
        ]
    workers = config.workers if args.workers is None else _workers(args.workers)
    _run_sweep(cells, workers, args.output, args.quiet)


def cmd_curves(args):
    cells = figure_cells(args.figure, reps=args.reps, seed=args.seed, n=args.n)
    _run_sweep(cells, _workers(args.workers), args.output, args.quiet)


def _finite_or_empty(f, *a):
    try:
        v = f(*a)
    except DomainError:
        return None
    return v if math.isfinite(v) else None


def cmd_diagnose_thresholds(args):
    ctx = ThresholdContext(_prior(args.prior))
    rows = []
    for u in parse_grid(args.grid):
        rows.append(
            (
                float(u),
                _finite_or_empty(ctx.xi, u),
                _finite_or_empty(ctx.zeta, u),
                _finite_or_empty(ctx.chi, u),
            )
        )
    write_csv(args.output, ("u", "xi", "zeta", "chi"), rows)


def cmd_diagnose_moments(args):
    ctx = MomentContext(_prior(args.prior))
    ws = parse_grid(args.w_grid)
    taus = parse_grid(args.tau_grid) if args.tau_grid else np.array([0.0])
    rows = []
    for w in ws:
        if not (0 < w <= 1):
            raise DomainError(f"w-grid value {w!r} is not in (0, 1]")
        mt = ctx.m_tilde(w)
        for tau in taus:
            rows.append((float(w), float(tau), mt, ctx.m1(tau, w), ctx.m2(tau, w)))
    write_csv(args.output, ("w", "tau", "m_tilde", "m1", "m2"), rows)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="slabtest",
        description="Spike-and-slab empirical Bayes multiple testing for sparse Gaussian means.",
    )
    parser.add_argument("--version", action="version", version=f"slabtest {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    priors_help = f"slab prior: {', '.join(KNOWN_PRIORS)} (default quasi-cauchy)"

    p = sub.add_parser("analyze", help="test one observation vector and write JSON")
    p.add_argument("--input", required=True, help="observation file, one real per line, optional header 'x'")
    p.add_argument("--prior", default="quasi-cauchy", help=priors_help)
    p.add_argument("--procedure", default="ebayes-q", choices=PROCEDURES, help="testing procedure (default ebayes-q)")
    p.add_argument("--t", type=float, default=0.1, help="target level in (0, 1); mci needs t < 1/2 (default 0.1)")
    p.add_argument("--L", type=float, default=None, help="factor L for ebayes-q0/ebayes-hybrid (default log log n)")
    p.add_argument("--w", type=float, default=None, help="use this weight instead of the MMLE")
    p.add_argument("--lower", choices=("1/n", "universal"), default="1/n", help="lower end of the weight search (default 1/n)")
    p.add_argument("--output", default="-", help="output JSON path ('-' for stdout)")
    p.set_defaults(func=cmd_analyze)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", required=True, help="output CSV path")
    common.add_argument("--workers", type=int, default=None, help="worker processes (default $SLABTEST_WORKERS or 1)")
    common.add_argument("--quiet", action="store_true", help="no progress lines on stderr")

    p = sub.add_parser("simulate", parents=[common], help="run a JSON-configured simulation, write metrics CSV")
    p.add_argument("--config", required=True, help="JSON config: one cell or {\"cells\": [...], \"seed\", \"workers\"}")
    p.add_argument("--seed", type=int, default=None, help="override the seed of every cell")
    p.add_argument("--reps", type=int, default=None, help="override the replication count of every cell")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("curves", parents=[common], help="run a preset experiment grid, write metrics CSV")
    p.add_argument("--figure", required=True, choices=FIGURES, help="preset grid")
    p.add_argument("--reps", type=int, default=2000, help="replications per cell (default 2000)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--n", type=int, default=10_000, help="dimension for the figure grids (default 10000)")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("diagnose", help="threshold and moment tables")
    dsub = p.add_subparsers(dest="what", required=True, metavar="WHAT")
    d = dsub.add_parser("thresholds", help="CSV u,xi,zeta,chi (blank outside the domain)")
    d.add_argument("--prior", default="quasi-cauchy", help=priors_help)
    d.add_argument("--grid", required=True, help="u grid: log:a:b:k, lin:a:b:k or a comma list")
    d.add_argument("--output", default="/dev/stdout", help="output CSV path (default stdout)")
    d.set_defaults(func=cmd_diagnose_thresholds)
    d = dsub.add_parser("moments", help="CSV w,tau,m_tilde,m1,m2")
    d.add_argument("--prior", default="quasi-cauchy", help=priors_help)
    d.add_argument("--w-grid", required=True, help="w grid: log:a:b:k, lin:a:b:k or a comma list")
    d.add_argument("--tau-grid", default=None, help="tau grid (default 0)")
    d.add_argument("--output", default="/dev/stdout", help="output CSV path (default stdout)")
    d.set_defaults(func=cmd_diagnose_moments)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"slabtest: error: {exc}", file=sys.stderr)
        return 2
    except CliError as exc:
        print(f"slabtest: error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"slabtest: error: domain: {exc}".replace("\n", " "), file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"slabtest: error: io: {exc}".replace("\n", " "), file=sys.stderr)
        return 1
    except Exception as exc:  # SimulationError and friends
        print(f"slabtest: error: {type(exc).__name__}: {exc}".replace("\n", " "), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
