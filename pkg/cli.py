"""
Command Line Module for Essential Cover Toolkit
Entry point wiring every component into subcommands:
verify | bounds | oracle | decompose | bang | find-uncovered | experiment
JSON goes to stdout (or --output), progress and messages go to stderr
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass

from anticoncentration import (
    ProductMeasure,
    antichain_mass_experiment,
    lo_check,
    lo_sweep,
    marginal_sweep,
    plot_report,
    scales_decay_experiment,
)
from bang_solver import BangSolverError, load_bang_instance, solve_bang, verify_bang
from cover_constructors import (
    OracleBudgetExceeded,
    lr_lower_bound,
    lr_upper_bound,
    minimum_essential_cover_size,
    yy_lower_bound,
)
from cover_verifier import check_essential, uncovered_vertices
from cube_core import CoverError, load_cover, load_params, parse_rational
from matrix_decomposition import check_four_way, decompose_four_way
from vertex_finder import FOUND, PHASE_FAILURE, find_uncovered

# Set UTF-8 encoding for Windows console
if sys.platform == 'win32':
    sys.stdout.reconfigure(encoding='utf-8')

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NEGATIVE = 1
EXIT_INPUT = 2
EXIT_BUDGET = 3


@dataclass(frozen=True)
class RunConfig:
    """Options shared by every subcommand"""
    seed: int | None = None
    threads: int = 1
    output: str | None = None
    verbosity: int = 0
    quiet: bool = False

    @classmethod
    def from_args(cls, args):
        return cls(seed=args.seed, threads=args.threads, output=args.output,
                   verbosity=args.verbose, quiet=args.quiet)

    @property
    def show_progress(self):
        return self.verbosity > 0 and not self.quiet


def configure_logging(config):
    if config.quiet:
        level = logging.ERROR
    elif config.verbosity >= 2:
        level = logging.DEBUG
    elif config.verbosity == 1:
        level = logging.INFO
    else:
        level = logging.WARNING
    root = logging.getLogger()
    root.handlers.clear()
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter('%(message)s'))
    root.addHandler(handler)
    root.setLevel(level)


def emit(payload, config):
    """Write a JSON document with stable key order"""
    text = json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + '\n'
    if config.output:
        with open(config.output, 'w', encoding='utf-8') as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _params(args, config):
    return load_params(getattr(args, 'params', None)).with_overrides(seed=config.seed)


def _csv_list(text, cast):
    return [cast(part) for part in text.split(',') if part.strip()]


# ─── Subcommands ───

def cmd_verify(args, config):
    cover = load_cover(args.input)
    report = check_essential(cover, threads=config.threads, show_progress=config.show_progress)
    payload = report.to_dict()
    if args.limit and not report.e1_holds:
        payload['uncovered'] = [x.to_list() for x in
                                uncovered_vertices(cover, limit=args.limit, threads=config.threads)]
    emit(payload, config)
    return EXIT_OK if report.is_essential else EXIT_NEGATIVE


def cmd_bounds(args, config):
    p = _params(args, config)
    emit({
        'n': args.n,
        'lr_lower': lr_lower_bound(args.n),
        'yy_lower': yy_lower_bound(args.n, p).value,
        'lr_upper': lr_upper_bound(args.n).value,
        'asymptotic_flags': {'lr_lower': False, 'yy_lower': True, 'lr_upper': True},
    }, config)
    return EXIT_OK


def cmd_oracle(args, config):
    result = minimum_essential_cover_size(args.n, max_nodes=args.max_nodes,
                                          show_progress=config.show_progress)
    emit(result.to_dict(), config)
    return EXIT_OK


def cmd_decompose(args, config):
    p = _params(args, config)
    cover = load_cover(args.input)
    matrix = cover.normal_matrix()
    d = decompose_four_way(matrix, p)
    report = check_four_way(matrix, d, p)
    emit({'decomposition': d.to_dict(), 'check': report.to_dict()}, config)
    return EXIT_OK if report.passed else EXIT_NEGATIVE


def cmd_bang(args, config):
    instance = load_bang_instance(args.input)
    eps = solve_bang(instance)
    ok = verify_bang(instance, eps)
    emit({'epsilon': list(eps), 'ok': ok}, config)
    return EXIT_OK if ok else EXIT_NEGATIVE


def cmd_find_uncovered(args, config):
    p = _params(args, config)
    cover = load_cover(args.input)
    outcome = find_uncovered(cover, p, fallback_exhaustive=args.fallback_exhaustive)
    emit(outcome.to_dict(), config)
    if outcome.status == FOUND:
        return EXIT_OK
    return EXIT_BUDGET if outcome.status == PHASE_FAILURE else EXIT_INPUT


def cmd_experiment(args, config):
    p = _params(args, config)
    if args.kind == 'lo':
        if args.vector:
            check = lo_check(_csv_list(args.vector, parse_rational), parse_rational(args.level))
            emit(check.to_dict(), config)
            return EXIT_OK if check.holds else EXIT_NEGATIVE
        table = lo_sweep(args.max_n, tuple(_csv_list(args.values, int)), config.show_progress)
        if args.csv:
            table.to_csv(args.csv, index=False)
        holds = bool(table['holds'].all())
        emit({'max_n': args.max_n, 'classes': len(table), 'all_hold': holds,
              'rows': table.to_dict(orient='records')}, config)
        return EXIT_OK if holds else EXIT_NEGATIVE

    if args.kind == 'antichain':
        measure = ProductMeasure(args.n, tuple(parse_rational(args.p) for _ in range(args.n)))
        report = antichain_mass_experiment(measure, args.trials, seed=p.seed,
                                           show_progress=config.show_progress)
        sweep = marginal_sweep(args.n, _csv_list(args.sweep, parse_rational))
        if args.csv:
            report.table.to_csv(args.csv, index=False)
        if args.plot:
            plot_report(sweep, 'sigma', 'mass_sigma', args.plot, 'Level-set mass times sigma')
        emit({**report.to_dict(), 'sweep': sweep.to_dict(orient='records')}, config)
        return EXIT_OK

    report = scales_decay_experiment(_csv_list(args.s_values, int), p.c0,
                                     parse_rational(args.delta), parse_rational(args.b),
                                     args.trials, seed=p.seed, a=parse_rational(args.level),
                                     show_progress=config.show_progress)
    if args.csv:
        report.table.to_csv(args.csv, index=False)
    if args.plot:
        plot_report(report.summary, 'S', 'mean', args.plot, 'Window probability by scale count')
    emit(report.to_dict(), config)
    return EXIT_OK


# ─── Parser ───

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--seed', type=int, default=None, help='Seed for every random stream (default 0)')
    common.add_argument('--threads', type=int, default=1, help='Worker threads for cube sweeps')
    common.add_argument('--output', type=str, default=None, help='Write JSON here instead of stdout')
    common.add_argument('-v', '--verbose', action='count', default=0)
    common.add_argument('--quiet', action='store_true')

    parser = argparse.ArgumentParser(
        prog='cli.py', description='Hyperplane covers of the hypercube and essential covers')
    sub = parser.add_subparsers(dest='command', required=True)

    pv = sub.add_parser('verify', parents=[common], help='Check (E1)-(E3) exhaustively')
    pv.add_argument('--input', required=True)
    pv.add_argument('--limit', type=int, default=0, help='List up to this many uncovered vertices')
    pv.set_defaults(func=cmd_verify)

    pb = sub.add_parser('bounds', parents=[common], help='Known bounds on e(n)')
    pb.add_argument('--n', type=int, required=True)
    pb.add_argument('--params', default=None)
    pb.set_defaults(func=cmd_bounds)

    po = sub.add_parser('oracle', parents=[common], help='Exact e(n) for n <= 4')
    po.add_argument('--n', type=int, required=True)
    po.add_argument('--max-nodes', type=int, default=5_000_000)
    po.set_defaults(func=cmd_oracle)

    pd_ = sub.add_parser('decompose', parents=[common], help='Four-way decomposition and its check')
    pd_.add_argument('--input', required=True)
    pd_.add_argument('--params', default=None)
    pd_.set_defaults(func=cmd_decompose)

    pg = sub.add_parser('bang', parents=[common], help='Solve a Bang instance')
    pg.add_argument('--input', required=True)
    pg.set_defaults(func=cmd_bang)

    pf = sub.add_parser('find-uncovered', parents=[common], help='Construct an uncovered vertex')
    pf.add_argument('--input', required=True)
    pf.add_argument('--params', default=None)
    pf.add_argument('--fallback-exhaustive', action='store_true')
    pf.set_defaults(func=cmd_find_uncovered)

    pe = sub.add_parser('experiment', parents=[common], help='Anti-concentration experiments')
    pe.add_argument('kind', choices=['lo', 'antichain', 'scales'])
    pe.add_argument('--params', default=None)
    pe.add_argument('--max-n', type=int, default=8)
    pe.add_argument('--values', default='1,2,3')
    pe.add_argument('--vector', default=None, help='Single Littlewood-Offord check, e.g. 1,1,1,1')
    pe.add_argument('--level', default='0', help='Atom for lo, window centre for scales')
    pe.add_argument('--n', type=int, default=9)
    pe.add_argument('--p', default='1/2', help='Marginal of every coordinate')
    pe.add_argument('--sweep', default='1/2,3/5,7/10,4/5,9/10')
    pe.add_argument('--trials', type=int, default=10)
    pe.add_argument('--s-values', default='1,2,3')
    pe.add_argument('--delta', default='1')
    pe.add_argument('--b', default='1')
    pe.add_argument('--csv', default=None, help='Also write the trial table as CSV')
    pe.add_argument('--plot', default=None, help='Save a matplotlib figure here')
    pe.set_defaults(func=cmd_experiment)
    return parser


def dispatch(argv):
    """
    Run one subcommand

    Args:
        argv: Arguments without the program name

    Returns:
        int: exit code (0 success, 1 negative verdict, 2 input or premise
        error, 3 budget exhausted)
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    config = RunConfig.from_args(args)
    configure_logging(config)
    try:
        return args.func(args, config)
    except (OracleBudgetExceeded, BangSolverError) as exc:
        logger.error("✗ Budget exhausted: %s", exc)
        return EXIT_BUDGET
    except (CoverError, ValueError, OSError) as exc:
        logger.error("✗ %s", exc)
        return EXIT_INPUT


def main():
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
