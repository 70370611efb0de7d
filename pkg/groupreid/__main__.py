"""
CLI entry point for groupreid.

Subcommands: gen-data, train, eval, compare-variants, export-features and
version. Every command reads one RunConfig (a JSON file via --config, or a
named preset); --seed and --jobs override the file.
"""

import argparse
import logging
import sys

from .exceptions import ConfigurationError, GroupReidError


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--config', type=str, help='Path to a JSON RunConfig document')
    parser.add_argument(
        '--preset',
        choices=('desk', 'smoke'),
        default='desk',
        help='Built-in configuration used when --config is not given (default: desk)'
    )
    parser.add_argument('--seed', type=int, help='Root seed (overrides the config)')
    parser.add_argument('--debug', action='store_true', help='Enable debug logging')
    parser.add_argument('--quiet', action='store_true', help='Only print errors and results')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='groupreid',
        description='groupreid - channel-group multi-branch re-identification experiments'
    )
    subparsers = parser.add_subparsers(dest='command', help='Available commands')

    gen = subparsers.add_parser('gen-data', help='Generate the synthetic dataset')
    _add_common(gen)
    gen.add_argument('--out', type=str, required=True, help='Dataset directory to write')

    train = subparsers.add_parser('train', help='Train a model and write a checkpoint')
    _add_common(train)
    train.add_argument('--data', type=str, help='Dataset directory (default: generate from config)')
    train.add_argument('--out', type=str, required=True, help='Output directory')

    evaluate = subparsers.add_parser('eval', help='Evaluate a checkpoint, one JSON report per setting')
    _add_common(evaluate)
    evaluate.add_argument('--checkpoint', type=str, required=True)
    evaluate.add_argument('--data', type=str, required=True)
    evaluate.add_argument(
        '--setting',
        action='append',
        help='standard, fast:i, concat:k or voting; repeat for several (default: from config)'
    )
    evaluate.add_argument(
        '--distances',
        type=str,
        help='Also write the query x gallery distance matrix of the first setting to this file'
    )

    grid = subparsers.add_parser('compare-variants', help='Train and evaluate the variant grid')
    _add_common(grid)
    grid.add_argument('--data', type=str, help='Dataset directory (default: generate from config)')
    grid.add_argument('--out', type=str, required=True, help='Grid JSON file to write')
    grid.add_argument('--jobs', type=int, help='Worker processes (overrides the config)')

    export = subparsers.add_parser('export-features', help='Export query and gallery descriptors')
    _add_common(export)
    export.add_argument('--checkpoint', type=str, required=True)
    export.add_argument('--data', type=str, required=True)
    export.add_argument('--out', type=str, required=True, help='Matrix file to write')
    export.add_argument('--setting', type=str, default='standard')

    subparsers.add_parser('version', help='Show version')
    return parser


def load_run_config(args):
    """RunConfig from --config or --preset, with flag overrides applied."""
    from .config import RunConfig, load_config

    config = load_config(args.config) if args.config else getattr(RunConfig, args.preset)()
    overrides = {}
    if args.seed is not None:
        overrides['seed'] = args.seed
    if getattr(args, 'jobs', None) is not None:
        overrides['jobs'] = args.jobs
    if args.debug:
        overrides['debug_mode'] = True
    return config.with_overrides(**overrides) if overrides else config


def configure_logging(args, debug_mode: bool = False) -> None:
    logger = logging.getLogger('groupreid')
    if args.debug or debug_mode:
        logging.basicConfig(level=logging.DEBUG)
        logger.setLevel(logging.DEBUG)
    elif not args.quiet:
        logging.basicConfig(level=logging.INFO, format='%(message)s', stream=sys.stderr)
        logger.setLevel(logging.INFO)
    else:
        logger.setLevel(logging.WARNING)


def run_gen_data(args, config) -> int:
    from .commands import cmd_gen_data

    path = cmd_gen_data(config, args.out)
    print(path)
    return 0


def run_train(args, config) -> int:
    from .commands import cmd_train
    from .diagnostics import print_report

    result = cmd_train(config, args.data, args.out)
    if not args.quiet:
        print_report(result.log)
    print(result.checkpoint_path)
    return 0


def run_eval(args, config) -> int:
    from .commands import cmd_eval

    for report in cmd_eval(args.checkpoint, args.data, args.setting, config.eval, args.distances):
        print(report.to_json())
    return 0


def run_compare_variants(args, config) -> int:
    from .commands import cmd_compare_variants

    cmd_compare_variants(config, args.data, args.out, args.jobs)
    print(args.out)
    return 0


def run_export_features(args, config) -> int:
    from .commands import cmd_export_features

    matrix_path, sidecar = cmd_export_features(
        args.checkpoint, args.data, args.out, args.setting, config.eval.inference_batch
    )
    print(matrix_path)
    print(sidecar)
    return 0


COMMANDS = {
    'gen-data': run_gen_data,
    'train': run_train,
    'eval': run_eval,
    'compare-variants': run_compare_variants,
    'export-features': run_export_features,
}


def main(argv=None) -> int:
    """Main CLI entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command == 'version':
        from . import __version__
        print(f"groupreid version {__version__}")
        return 0

    handler = COMMANDS.get(args.command)
    if handler is None:
        parser.print_help()
        return 0

    try:
        config = load_run_config(args)
        configure_logging(args, config.debug_mode)
        return handler(args, config)
    except ConfigurationError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 2
    except GroupReidError as e:
        print(f"Error: {e}", file=sys.stderr)
        return 1


if __name__ == '__main__':
    sys.exit(main())
