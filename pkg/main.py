"""Main entry point for hhsharp: python main.py <subcommand> [options]"""

from __future__ import annotations

import logging
import sys
import traceback

from cli import main as cli_main
from hh_config import ExitCodes
from logger import ROOT_LOGGER, get_logger, setup_logging

logger = get_logger("main")


def main(argv: list[str] | None = None) -> int:
    """Run the CLI; anything the CLI does not map to an exit code is fatal"""
    try:
        return cli_main(argv)
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return ExitCodes.UNEXPECTED
    except Exception as e:
        # Logging may not be configured yet if argument parsing itself failed
        if not logging.getLogger(ROOT_LOGGER).handlers:
            setup_logging()
        logger.critical("FATAL ERROR: %s", e)
        logger.debug(traceback.format_exc())
        return ExitCodes.UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
