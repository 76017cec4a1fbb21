"""
Command-line entry point.

Usage:
    sled-qubit dynamics --config run.json --out runs --profile fast
    sled-qubit readout --seed 3 --workers 4
    python -m sled_qubit noise-check --verbose
"""

import argparse
import logging
import sys
from typing import List, Optional

from sled_qubit import __version__
from sled_qubit.exceptions import ConfigurationError, SledQubitError
from sled_qubit.harness.commands import COMMANDS
from sled_qubit.harness.config import PROFILES, RunConfig

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sled-qubit",
        description="Driven dissipative qubit: Lindblad and SLED dynamics, steady states, spectroscopy, readout",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=sorted(COMMANDS), help="Experiment to run")
    parser.add_argument("--config", metavar="PATH", help="JSON run configuration (default: built-in parameters)")
    parser.add_argument("--out", metavar="DIR", help="Output directory (default: output.directory)")
    parser.add_argument("--profile", choices=sorted(PROFILES), help="Desk-scale preset")
    parser.add_argument("--seed", type=int, metavar="N", help="Base seed of the trajectory ensemble")
    parser.add_argument("--workers", type=int, metavar="N", help="Worker threads")
    parser.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    if args.profile:
        config = config.with_profile(args.profile)
    return config.with_overrides(seed=args.seed, workers=args.workers)


def main(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand.

    Returns:
        0 on success, 2 on a configuration error, 3 on a numerical failure
    """
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args)
        out_dir = args.out or config.output.directory
        manifest = COMMANDS[args.command](config, out_dir)
    except ConfigurationError as exc:
        logger.error("Configuration error: %s", exc)
        return EXIT_CONFIG
    except (SledQubitError, ValueError) as exc:
        logger.error("Run '%s' failed: %s", args.command, exc)
        return EXIT_NUMERICAL
    print(f"{args.command}: {len(manifest.files)} files written to {out_dir}/{args.command}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
