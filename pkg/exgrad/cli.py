"""
Command line interface.

    exgrad solve --problem paper-example.json --x1 3.5 --out trace.csv
    exgrad reproduce --preset paper-35
    exgrad check --problem paper-example.json --samples 200
    exgrad rate --trace trace.csv
    exgrad batch --problem a.json b.json --out-dir runs/

Exit codes: 0 ok, 1 usage or parse error, 2 iteration budget exhausted, 3 inner solver
failure, 4 hypothesis check failed.
"""
import argparse
import logging
import os
import sys
from typing import List, Optional

from . import harness
from .math_utils import ExperimentError, RateEstimationError, ScheduleError, parse_vector
from .version import __version__

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """ Argument parser reporting usage errors with exit code 1. """

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(harness.EXIT_USAGE, f'{self.prog}: error: {message}\n')


def _problem_path(name: str) -> str:
    if os.path.exists(name):
        return name
    return harness.preset_path(name)


def _load(name: str, **overrides) -> harness.ExperimentSpec:
    """ Experiment file, or named preset with its own start point. """
    if not os.path.exists(name) and name in harness.PRESETS:
        return harness.load_preset(name, **overrides)
    return harness.load_experiment(_problem_path(name), **overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='exgrad', description='Extragradient solver for equilibrium and fixed-point problems')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    parser.add_argument('-v', '--verbose', action='store_true', default=False, help='log progress at INFO level')
    commands = parser.add_subparsers(dest='command', required=True)

    solve = commands.add_parser('solve', help='run an experiment file and write its trace')
    solve.add_argument('--problem', required=True, help='experiment file or preset name')
    solve.add_argument('--x1', type=parse_vector, help='starting point, comma or semicolon separated')
    solve.add_argument('--max-iters', type=int, help='iteration budget')
    solve.add_argument('--tol', type=float, help='stop when the step norm is at most this')
    solve.add_argument('--out', help='trace CSV path; the summary is written beside it')

    reproduce = commands.add_parser('reproduce', help='print the table of a shipped preset')
    reproduce.add_argument('--preset', required=True, choices=sorted(harness.PRESETS))

    check = commands.add_parser('check', help='check the hypotheses of an experiment file')
    check.add_argument('--problem', required=True, help='experiment file or preset name')
    check.add_argument('--samples', type=int, default=None, help='sample points per check')

    rate = commands.add_parser('rate', help='estimate the geometric rate of a trace CSV')
    rate.add_argument('--trace', required=True)

    batch = commands.add_parser('batch', help='run several experiment files concurrently')
    batch.add_argument('--problem', required=True, nargs='+', help='experiment files or preset names')
    batch.add_argument('--out-dir', required=True, help='directory receiving one trace per experiment')
    batch.add_argument('--workers', type=int, default=None)
    return parser


def _solve(args) -> int:
    x1 = None if args.x1 is None else args.x1.tolist()
    spec = _load(args.problem, x1=x1, max_iters=args.max_iters, stop_tol=args.tol)
    outcome = harness.run(spec, args.out)
    print(f'{spec.name}: {outcome.result.status.value} after {outcome.result.iterations} iterations, '
          f'final {outcome.result.final.tolist()}')
    if outcome.result.message:
        print(outcome.result.message)
    return harness.exit_code(outcome.result.status)


def _reproduce(args) -> int:
    print(harness.reproduce(args.preset))
    return harness.EXIT_OK


def _check(args) -> int:
    results = harness.check(_problem_path(args.problem), args.samples)
    print(harness.format_report(results))
    return harness.EXIT_OK if harness.check_passed(results) else harness.EXIT_CHECK_FAILED


def _rate(args) -> int:
    estimate = harness.estimate_rate(args.trace)
    print(f'geometric ratio {estimate.geometric_ratio:.6f}, r^2 {estimate.r_squared:.6f}, '
          f'iterations {estimate.window[0]}-{estimate.window[1]}')
    return harness.EXIT_OK


def _batch(args) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    specs = [_load(name) for name in args.problem]
    outs = [os.path.join(args.out_dir, f'{i:02d}-{spec.name}.csv') for i, spec in enumerate(specs)]
    outcomes = harness.run_many(specs, outs, args.workers)
    for spec, outcome in zip(specs, outcomes):
        print(f'{spec.name}: {outcome.result.status.value} after {outcome.result.iterations} iterations '
              f'-> {outcome.trace_path}')
    return max(harness.exit_code(o.result.status) for o in outcomes)


COMMANDS = {'solve': _solve, 'reproduce': _reproduce, 'check': _check, 'rate': _rate, 'batch': _batch}


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    try:
        return COMMANDS[args.command](args)
    except (ExperimentError, ScheduleError, RateEstimationError) as err:
        print(f'exgrad: error: {err}', file=sys.stderr)
        return harness.EXIT_USAGE
