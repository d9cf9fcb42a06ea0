"""Loguru sink setup."""
import sys
from typing import Optional

from loguru import logger


def configure_logging(level: str = "INFO", log_file: Optional[str] = None) -> None:
    """Replace the default sink with a stderr sink at ``level`` plus an optional rotating file."""
    logger.remove()
    logger.add(sys.stderr, level=level.upper())
    if log_file:
        logger.add(log_file, rotation="1 day", retention="7 days", level=level.upper())
    logger.debug(f"Logging configured at level {level.upper()}")
