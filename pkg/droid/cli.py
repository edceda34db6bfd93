"""
Command line arguments and specific options.
"""

# Main program, parse the args, read config and launch stages
from typing import Optional, Sequence, Text
import argparse
import sys

from droid import log, _init_log
from droid.__version__ import __version__, __author__
from droid.artifacts import STAGES
from droid.config import ExperimentConfig
from droid.errors import DroidError, InvalidConfigError, StageDependencyError
from droid.harness import parse_stages, run_pipeline, run_variants, show_reports

COMMANDS = STAGES + ("variants", "report", "run")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEPENDENCY = 3
EXIT_RUNTIME = 4


def main(_args: Optional[Sequence[Text]] = None) -> None:
    """Main program entrypoint"""
    # Parse arguments
    args: argparse.Namespace = get_arg_parser().parse_args(_args)

    # Init logger with CLi arguments
    _init_log(args.verbose, args.quiet, logfile=args.log_file)

    # If template conf , print and exit
    if args.template_conf:
        template_conf()

    if args.version:
        # Print and exit
        version()

    if not args.command:
        log.error(f"No command given, choose one of {', '.join(COMMANDS)}")
        exit(EXIT_CONFIG)

    exit(run_command(args))


def run_command(args: argparse.Namespace) -> int:
    """
    Run one CLI command and map errors to exit codes.

    :Return: 0 on success, 2 for configuration errors, 3 when a stage misses
             its inputs, 4 for any other runtime or numeric error.
    """
    try:
        if args.command == "report":
            print(repr(show_reports(args.out)))
            return EXIT_OK
        # Read config
        configuration = ExperimentConfig.fromcliargs(args)
        if args.command == "variants":
            run_variants(configuration, args.out)
            return EXIT_OK
        stages = parse_stages(args.stages) if args.command == "run" else [args.command]
        return run_pipeline(configuration, stages, args.out)
    except InvalidConfigError as err:
        log.error(f"Configuration error: {err}")
        return EXIT_CONFIG
    except StageDependencyError as err:
        log.error(str(err))
        return EXIT_DEPENDENCY
    except (DroidError, ArithmeticError, OSError) as err:
        log.error(f"{type(err).__name__}: {err}")
        return EXIT_RUNTIME


def version() -> None:
    """Print version and contributors"""
    print(f"Version:\t\t{__version__}")
    print(f"Authors:\t\t{__author__}")
    exit(0)


def template_conf() -> None:
    """Print template configuration"""
    print(ExperimentConfig.TEMPLATE_FILE)
    exit(0)


def get_arg_parser() -> argparse.ArgumentParser:
    """Parse CLI arguments"""

    parser = argparse.ArgumentParser(
        description="""Identify a domain randomization distribution from torque trajectories of a single demonstration,
train door-opening policies and measure their transfer on a simulator with hidden parameters.
Run with --template_conf to print a documented configuration file."""
    )
    parser.add_argument(
        "command",
        metavar="Command",
        help=f"""One of {', '.join(COMMANDS)}.
A stage name runs that stage only, 'run' runs the stages given with --stages (all by default),
'variants' runs the spring variants and demonstration pose experiments,
'report' prints the evaluation summary of --out.""",
        nargs="?",
        choices=COMMANDS,
        default=None,
    )
    parser.add_argument(
        "--config",
        "-c",
        metavar="File path",
        help="JSON experiment configuration. Omitted sections and fields get default values.",
        default=None,
    )
    parser.add_argument(
        "--template_conf",
        "--tmpconf",
        help="Print a template config file.",
        action="store_true",
    )
    parser.add_argument(
        "--out",
        "-o",
        metavar="Path",
        help="Output directory, one process at a time can use it",
        default="droid_out",
    )
    parser.add_argument(
        "--seed",
        metavar="Int",
        help=f"Override every stage seed, has priority over the {ExperimentConfig.SEED_ENV} environment variable",
        type=int,
        default=None,
    )
    parser.add_argument(
        "--stages",
        metavar="List",
        help=f"Comma separated stages for the 'run' command, in {','.join(STAGES)}",
        default=None,
    )
    parser.add_argument(
        "--log_file",
        "--log",
        metavar="Path",
        help="Write logs to a file as well",
        default=None,
    )
    parser.add_argument(
        "--verbose",
        "-v",
        help="Verbose output, print configuration and per-candidate / per-episode results.",
        action="store_true",
    )
    parser.add_argument(
        "--quiet",
        "-q",
        help="Print only errors",
        action="store_true",
    )
    parser.add_argument(
        "--version", "-V", help="Print droid version", action="store_true"
    )
    return parser


"""Main program if called with droid/cli.py"""
if __name__ == "__main__":
    main()
