import logging
from typing import Optional

from config import LOG_FORMAT, LOG_LEVEL

_configured = False


def configure_logging(level: Optional[str] = None) -> None:
    """Install the single stream handler; later calls only change the level."""
    global _configured
    root = logging.getLogger()
    if not _configured:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        root.addHandler(handler)
        _configured = True
    root.setLevel((level or LOG_LEVEL).upper())


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)
