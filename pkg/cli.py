"""
Command-line entry point: python cli.py <command> [options]
"""
import argparse
import sys
from typing import List, Optional

import structlog

import BootstrapCI
import Evaluate
import FitWeek
import MultiVersion
import Simulate
from shared.config import get_settings
from shared.logger_config import configure_logger
from shared.models import VintageMode
from shared.solver import Regime

COMMANDS = {
    "simulate": Simulate.main,
    "evaluate": Evaluate.main,
    "multiversion": MultiVersion.main,
    "bootstrap-ci": BootstrapCI.main,
    "fit-week": FitWeek.main,
}


def _common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--seed", type=int, help="global seed (unsigned 64-bit)")
    parser.add_argument("--vintage-mode", dest="vintage_mode", choices=[m.value for m in VintageMode])
    parser.add_argument("--out", help="output directory; must not exist")
    parser.add_argument("--threads", type=int, help="worker threads")
    parser.add_argument("--regime", choices=[r.value for r in Regime], help="penalty specification")
    parser.add_argument("--verbose", action="store_true", help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="argo", description="ARGO influenza nowcasting toolkit")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="write a seeded synthetic dataset")
    _common(simulate)
    simulate.add_argument("--spec", help="JSON synthetic data specification")

    evaluate = commands.add_parser("evaluate", help="retrospective evaluation against the benchmarks")
    _common(evaluate)

    multiversion = commands.add_parser("multiversion", help="evaluate once per search panel version")
    _common(multiversion)
    multiversion.add_argument("--panels", required=True, help="glob matching the panel versions")

    bootstrap = commands.add_parser("bootstrap-ci", help="relative efficiency CI from two error files")
    _common(bootstrap)
    bootstrap.add_argument("--errors1", required=True, help="CSV with an 'error' column, reference method")
    bootstrap.add_argument("--errors2", required=True, help="CSV with an 'error' column, compared method")
    bootstrap.add_argument("--block-length", dest="block_length", type=float, default=None)
    bootstrap.add_argument("--replicates", type=int, default=None)
    bootstrap.add_argument("--level", type=float, default=None)

    fit_week = commands.add_parser("fit-week", help="fit and dump a single week")
    _common(fit_week)
    fit_week.add_argument("--week", required=True, help="target week as YYYY-WW")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    level = "DEBUG" if args.verbose else get_settings().get("log_level", "INFO")
    configure_logger(level)
    logger = structlog.get_logger()
    logger.info("Command started", command=args.command)
    code = COMMANDS[args.command](args)
    logger.info("Command finished", command=args.command, exit_code=code)
    return code


if __name__ == "__main__":
    sys.exit(main())
