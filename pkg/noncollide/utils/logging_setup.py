"""Logging setup: human-readable or JSON lines on stderr."""

import logging
import sys
from typing import Optional

from pythonjsonlogger.json import JsonFormatter

from noncollide.config import LOG_FORMAT, LOG_JSON, LOG_LEVEL

_HANDLER_NAME = "noncollide-stderr"


def setup_logging(level: Optional[str] = None, json_logs: Optional[bool] = None) -> logging.Logger:
    """Configure the package logger. Safe to call repeatedly.

    Args:
        level: Log level name (default: LOG_LEVEL)
        json_logs: Emit JSON lines instead of plain text (default: LOG_JSON)

    Returns:
        The configured "noncollide" logger
    """
    level = level or LOG_LEVEL
    json_logs = LOG_JSON if json_logs is None else json_logs

    logger = logging.getLogger("noncollide")
    logger.setLevel(level.upper())
    logger.propagate = False

    for handler in list(logger.handlers):
        if handler.get_name() == _HANDLER_NAME:
            logger.removeHandler(handler)

    handler = logging.StreamHandler(sys.stderr)
    handler.set_name(_HANDLER_NAME)
    if json_logs:
        handler.setFormatter(JsonFormatter("%(asctime)s %(name)s %(levelname)s %(message)s"))
    else:
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
    logger.addHandler(handler)
    return logger
