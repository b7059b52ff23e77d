"""Centralized logging configuration for hhsharp"""

from __future__ import annotations

import logging
import sys
from logging.handlers import RotatingFileHandler
from pathlib import Path


# Default log format
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

ROOT_LOGGER = "hhsharp"

# Log file settings
LOG_FILE = Path("./logs/hhsharp.log")
FALLBACK_LOG_FILE = Path("./hhsharp.log")
MAX_LOG_SIZE = 5 * 1024 * 1024  # 5 MB
BACKUP_COUNT = 3


def _file_handler(path: Path, level: int,
                  formatter: logging.Formatter) -> RotatingFileHandler:
    handler = RotatingFileHandler(
        path,
        maxBytes=MAX_LOG_SIZE,
        backupCount=BACKUP_COUNT
    )
    handler.setLevel(level)
    handler.setFormatter(formatter)
    return handler


def setup_logging(
    level: int = logging.INFO,
    log_to_file: bool = False,
    log_to_console: bool = True,
    log_file: Path | None = None,
) -> logging.Logger:
    """
    Set up the hhsharp logger with console and optional file handlers.

    Console output goes to stderr; stdout is reserved for reports.

    Args:
        level: Logging level (default INFO)
        log_to_file: Whether to log to a rotating file (default False)
        log_to_console: Whether to log to stderr (default True)
        log_file: File to log to (default ./logs/hhsharp.log)

    Returns:
        Configured hhsharp logger
    """
    logger = logging.getLogger(ROOT_LOGGER)
    logger.setLevel(level)
    logger.propagate = False

    # Clear any existing handlers
    logger.handlers.clear()

    formatter = logging.Formatter(LOG_FORMAT, datefmt=LOG_DATE_FORMAT)

    if log_to_console:
        console_handler = logging.StreamHandler(sys.stderr)
        console_handler.setLevel(level)
        console_handler.setFormatter(formatter)
        logger.addHandler(console_handler)

    if log_to_file:
        target = Path(log_file) if log_file is not None else LOG_FILE
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            logger.addHandler(_file_handler(target, level, formatter))
        except OSError:
            # Fall back to the working directory if the target is not writable
            logger.addHandler(_file_handler(FALLBACK_LOG_FILE, level, formatter))
            logger.warning(f"Could not write to {target}, using {FALLBACK_LOG_FILE}")

    return logger


def get_logger(name: str) -> logging.Logger:
    """
    Get a child logger for a specific module.

    Args:
        name: Module name (e.g., 'quad', 'verify')

    Returns:
        Logger instance for the module
    """
    return logging.getLogger(f"{ROOT_LOGGER}.{name}")
