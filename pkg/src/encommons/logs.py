"""encommons.logs

Module loggers. Library code only calls ``get_logger``; the CLI configures output.
"""

from __future__ import annotations

import logging

_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


def get_logger(name: str) -> logging.Logger:
    return logging.getLogger(name)


def configure_logging(level: str | int = "WARNING") -> None:
    if isinstance(level, str):
        level = level.upper()
    logging.basicConfig(level=level, format=_FORMAT, force=True)
