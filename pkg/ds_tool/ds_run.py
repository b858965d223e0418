"""dunkl-sparse experiment runner

This script runs the sparse domination and weighted norm experiments on a
discretized Dunkl setting and writes a JSON report plus a CSV table with one
row per trial. Settings come from the configuration file (see the README);
the flags below override them.

For usage of the script, try the -h option.
"""
import argparse
import dataclasses
import logging
import os
import sys

from ds_tool import config, harness
from ds_tool.analysis import storage

COMMANDS = {
    'dyadic': {'verify': 'dyadic'},
    'weights': {'ap': 'weights.ap', 'rh': 'weights.rh', 'bmo': 'weights.bmo',
        'rdf': 'weights.rdf'},
    'sparse': {'dominate': 'sparse', 'commutator': 'commutator'},
    'bounds': {'weighted': 'weighted', 'two-weight': 'two_weight', 'lower': 'lower',
        'rdf-transfer': 'rdf'},
    'kernel': {'check': 'kernel'},
}


def setup_logging(verbosity):
    level = logging.WARNING if not verbosity else \
            (logging.INFO if verbosity == 1 else logging.DEBUG)
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')


def apply_overrides(run, args):
    """Return `run` with the command line overrides applied and validated."""
    changes = {}
    if args.seed is not None:
        changes['seed'] = args.seed
    if args.resolution is not None:
        changes['resolution'] = args.resolution
    if args.out is not None:
        changes['directory'] = args.out
    if getattr(args, 'exp', None):
        changes['experiments'] = [e.strip() for e in args.exp.split(',') if e.strip()]
    run = dataclasses.replace(run, **changes)
    config.validate(run)
    return run


def build_dyadic(run):
    """Build (or fetch from the cache) grid and bundle, calibrate C0 and store
    both in the output directory; the operator is not assembled."""
    ctx = harness.Context(run)
    bundle = ctx.calibrated
    if not os.path.exists(run.directory):
        os.makedirs(run.directory)
    grid_path = os.path.join(run.directory, 'grid.bin')
    dyadic_path = os.path.join(run.directory, 'dyadic.json')
    print("Writing grid to", grid_path)
    storage.write_grid(grid_path, ctx.grid)
    print("Writing dyadic systems to", dyadic_path)
    storage.write_dyadic(dyadic_path, bundle)
    return 0


def make_parser():
    parser = argparse.ArgumentParser(description='dunkl-sparse experiment runner')
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('-c', '--config', metavar='PATH',
            help='configuration file (default: the usual places, then built-in defaults)')
    common.add_argument('--seed', type=int, help='base seed of all random draws')
    common.add_argument('--resolution', type=int, help='grid cells per axis')
    common.add_argument('--out', metavar='DIR', help='output directory')
    common.add_argument('-v', '--verbose', action='count', default=0,
            help='log progress (-v) or debugging details (-vv)')
    commands = parser.add_subparsers(dest='command', required=True)
    run_parser = commands.add_parser('run', parents=[common],
            help='run the configured experiments')
    run_parser.add_argument('--exp', metavar='NAME[,NAME...]',
            help='experiments to run, one of: ' + ', '.join(config.EXPERIMENTS))
    run_parser.add_argument('--resolution-check', action='store_true', default=False,
            help='rerun at doubled resolution and report the max-ratio factor')
    dyadic_parser = commands.add_parser('dyadic', help='dyadic systems')
    actions = dyadic_parser.add_subparsers(dest='action', required=True)
    actions.add_parser('build', parents=[common],
            help='build grid and dyadic systems and store them')
    actions.add_parser('verify', parents=[common], help='verify the dyadic properties')
    for command, mapping in COMMANDS.items():
        if command == 'dyadic':
            continue
        sub = commands.add_parser(command, help='%s experiments' % command)
        actions = sub.add_subparsers(dest='action', required=True)
        for action in mapping:
            actions.add_parser(action, parents=[common])
    return parser


def main_body(args):
    args = make_parser().parse_args(args[1:])
    setup_logging(args.verbose)
    run = apply_overrides(config.discover_and_load(args.config), args)
    if args.command == 'dyadic' and args.action == 'build':
        return build_dyadic(run)
    if args.command == 'run':
        report = harness.run(run, resolution_check=args.resolution_check)
    else:
        report = harness.run(run, [COMMANDS[args.command][args.action]])
    for path in harness.emit(report, run.directory, run.formats):
        print("Wrote", path)
    for block in report['experiments']:
        print('{:<12} {}'.format(block['name'], 'passed' if block['passed'] else 'FAILED'))
    return 0 if report['passed'] else 1


def main():
    """Wrapper for nicer error case handling."""
    #pylint: disable=broad-except
    try:
        sys.exit(main_body(sys.argv))
    except Exception as e:
        if 'DEBUG' not in os.environ:
            print('Error:',str(e))
            print(("\nNote: Rerun the script with the environment variable DEBUG=1 "
                "to obtain a traceback."))
            sys.exit(9)
        else:
            raise e

if __name__ == '__main__':
    main()
