"""Command line interface for the secure ISAC planner"""

import argparse
import os
import sys

import logging
import tempfile
import textwrap

import secure_isac
from secure_isac.cli import output
from secure_isac.core.exceptions import InfeasibleScenario
from secure_isac.core.scenario import load_scenario, load_scenario_file
from secure_isac.manager import experiments
from secure_isac.manager.manager import SCHEMES, BCDManager, ExceptionHandler


LOG = logging.getLogger('secure-isac')
DEBUG = bool(os.environ.get('DEBUG')) or False

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FLAGGED = 2

_stream_handler = None


def _init_logger(debug=False):
    """
    Initialize logger
    :param debug: show debugging messages (default False)
    """
    global _stream_handler

    fd, logfile = tempfile.mkstemp(prefix='secure-isac_', suffix='.log')
    os.close(fd)

    logging.basicConfig(level=logging.DEBUG,
                        format='%(asctime)s - %(name)-24s - [%(levelname)-8s]: %(message)s',
                        datefmt='%m-%d %H:%M',
                        filename=logfile,
                        filemode='w')

    if debug:
        sys.stdout.write("logging file: %s\n" % logfile)

    LOG.setLevel(logging.DEBUG)

    # Stream handler shows INFO and up unless debugging
    if _stream_handler is not None:
        LOG.removeHandler(_stream_handler)
    _stream_handler = logging.StreamHandler(sys.stderr)
    _stream_handler.setLevel(logging.DEBUG if debug else logging.INFO)
    LOG.addHandler(_stream_handler)

    LOG.debug("logging initialized")


def _db_list(values):
    return [10.0 ** (v / 10.0) for v in values]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='secure-isac',
        description='Secure ISAC planner - UAV trajectory and beamforming '
                    'against an eavesdropper under a sensing constraint',
        formatter_class=argparse.RawTextHelpFormatter
    )

    parser.add_argument(
        '-V', '--version', action='version',
        version="%(prog)s {version}".format(version=secure_isac.__version__),
        help='Show current version and exit'
    )

    parser.add_argument(
        '--debug', action='store_true', default=DEBUG,
        help="Show debugging messages and tracebacks"
    )

    # Options shared by every sub command
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        'config', action='store', nargs='?',
        help="Scenario file (JSON); built-in defaults when omitted"
    )
    common.add_argument(
        '--seed', action='store', type=int,
        help="Override the scenario seed"
    )
    common.add_argument(
        '-o', '--out', action='store', default='results',
        help="Output directory (default 'results')"
    )
    common.add_argument(
        '--paper-literal-velocity', action='store_true',
        help="Bound the squared per-slot displacement by slot_len * v_max"
    )
    common.add_argument(
        '--paper-literal-sensing-gain', action='store_true',
        help="Leave the altitude out of the echo path loss"
    )
    common.add_argument(
        '--evaluate-with-nlos', action='store', type=int, metavar='N',
        help="Also evaluate the result over N Rician channel draws"
    )
    common.add_argument(
        '--dump-problems', action='store', metavar='DIR',
        help="Write a text dump of every conic program into DIR"
    )

    subparsers = parser.add_subparsers(dest='command', metavar='COMMAND',
                                       description="Secure ISAC sub commands")

    parser_run = subparsers.add_parser(
        'run', parents=[common],
        formatter_class=argparse.RawTextHelpFormatter,
        help="Optimize one scenario",
        description=textwrap.dedent('''\
        Optimize one scenario and write convergence.csv, trajectory.csv,
        beams_summary.csv and result.json.
        Exit code 0 on success, 2 when the sensing threshold is missed, 1 on error.
        ''')
    )
    parser_run.add_argument(
        '--scheme', action='store', choices=SCHEMES, default='proposed',
        help="Optimization scheme (default 'proposed')"
    )

    parser_sweep_t = subparsers.add_parser(
        'sweep-t', parents=[common],
        help="Sum secrecy rate versus mission time"
    )
    parser_sweep_t.add_argument(
        '-T', '--mission-times', action='store', type=float, nargs='+', required=True,
        metavar='T', help="Mission times in seconds"
    )
    parser_sweep_t.add_argument(
        '--scheme', action='append', choices=SCHEMES, dest='schemes',
        help="Scheme to include (repeatable, default all)"
    )
    parser_sweep_t.add_argument(
        '-j', '--jobs', action='store', type=int, default=1,
        help="Sweep points run concurrently (default 1)"
    )

    parser_sweep_gamma = subparsers.add_parser(
        'sweep-gamma', parents=[common],
        help="Optimized trajectory versus sensing threshold"
    )
    thresholds = parser_sweep_gamma.add_mutually_exclusive_group(required=True)
    thresholds.add_argument(
        '-g', '--gamma-db', action='store', type=float, nargs='+',
        metavar='DB', help="Sensing SINR thresholds in dB"
    )
    thresholds.add_argument(
        '--gamma', action='store', type=float, nargs='+',
        metavar='LINEAR', help="Linear sensing SINR thresholds, 0 disables sensing"
    )
    parser_sweep_gamma.add_argument(
        '--scheme', action='store', choices=SCHEMES, default='proposed',
        help="Optimization scheme (default 'proposed')"
    )
    parser_sweep_gamma.add_argument(
        '-j', '--jobs', action='store', type=int, default=1,
        help="Sweep points run concurrently (default 1)"
    )

    return parser


def _load_config(args):
    overrides = {}
    if args.seed is not None:
        overrides['seed'] = args.seed
    if args.paper_literal_velocity:
        overrides['paper_literal_velocity'] = True
    if args.paper_literal_sensing_gain:
        overrides['paper_literal_sensing_gain'] = True
    if args.evaluate_with_nlos is not None:
        overrides['evaluate_with_nlos'] = args.evaluate_with_nlos

    if args.config:
        return load_scenario_file(args.config, **overrides)
    return load_scenario(**overrides)


def cmd_run(args) -> int:
    cfg = _load_config(args)
    manager = BCDManager(cfg, dump_dir=args.dump_problems)
    try:
        result = manager.run(args.scheme)
    except InfeasibleScenario as exc:
        LOG.error(exc)
        return EXIT_FLAGGED

    manager.print_summary(result)
    output.write_run(result, args.out)
    return EXIT_FLAGGED if result.flagged_slots else EXIT_OK


def cmd_sweep_mission_time(args) -> int:
    cfg = _load_config(args)
    rows = experiments.sweep_mission_time(cfg, args.mission_times,
                                          schemes=tuple(args.schemes or SCHEMES),
                                          jobs=args.jobs, out=args.out,
                                          writer=output.write_run, dump=args.dump_problems)
    path = output.write_mission_time_sweep(rows, args.out)
    LOG.info("sweep written to %s", path)
    return EXIT_FLAGGED if any(row['status'] != 'optimal' for row in rows) else EXIT_OK


def cmd_sweep_sensing_threshold(args) -> int:
    cfg = _load_config(args)
    thresholds = args.gamma if args.gamma is not None else _db_list(args.gamma_db)
    rows = experiments.sweep_sensing_threshold(cfg, thresholds,
                                               scheme=args.scheme, jobs=args.jobs,
                                               out=args.out, writer=output.write_run,
                                               dump=args.dump_problems)
    path = output.write_threshold_sweep(rows, args.out)
    LOG.info("sweep written to %s", path)
    return EXIT_FLAGGED if any(row['status'] != 'optimal' for row in rows) else EXIT_OK


COMMANDS = {
    'run': cmd_run,
    'sweep-t': cmd_sweep_mission_time,
    'sweep-gamma': cmd_sweep_sensing_threshold,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    # Bring logging stuff up ASAP
    _init_logger(debug=args.debug)
    sys.excepthook = ExceptionHandler(debug=args.debug)

    if args.command is None:
        parser.print_help()
        return EXIT_ERROR

    return COMMANDS[args.command](args)


if __name__ == '__main__':
    sys.exit(main())
