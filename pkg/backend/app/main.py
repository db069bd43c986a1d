"""
Command-line entry point of the liquidity-recycling toolkit
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from pydantic import ValidationError

from app.cli.commands import calibrate, estimate, placebo, report, simulate
from app.core.config import load_run_config
from app.core.dependencies import get_settings
from app.core.exceptions import ConfigError, ToolkitError

# Load environment variables
load_dotenv()

logger = logging.getLogger(__name__)

COMMANDS = (simulate, estimate, placebo, calibrate, report)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="liquidity-recycling",
        description="Structural simulation and econometrics of DeFi exploit shocks",
    )
    parser.add_argument("--config", type=Path, default=None, help="YAML run configuration")
    parser.add_argument("--seed", type=int, default=None, help="Random seed")
    parser.add_argument("--out", type=Path, default=None, help="Output directory")
    parser.add_argument("--threads", type=int, default=None, help="Worker cap for replicates")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        command.register(subparsers)
    return parser


def _cli_overrides(args: argparse.Namespace) -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.out is not None:
        overrides["paths"] = {"output_dir": args.out}
    return overrides


def main(argv: Optional[List[str]] = None) -> int:
    """Run one command; the return value is the process exit code"""
    settings = get_settings()
    # Configure logging
    logging.basicConfig(
        level=getattr(logging, settings.log_level.upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )
    args = build_parser().parse_args(argv)
    try:
        config = load_run_config(args.config, _cli_overrides(args), env=settings)
        manifest = args.handler(args, config)
    except ValidationError as e:
        error: ToolkitError = ConfigError(f"invalid configuration: {e}")
        logger.error(str(error))
        return error.exit_code
    except ToolkitError as e:
        logger.error("%s failed: %s", args.command, e)
        return e.exit_code
    logger.info("Done; manifest at %s", manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
