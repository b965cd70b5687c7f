"""Logging setup for the command-line entry point."""

from __future__ import annotations

import logging
import os

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LEVEL_ENV = "PLANEFUSION_LOG_LEVEL"


def configure_logging(level: str | int | None = None) -> None:
    """
    Install a single stream handler on the package logger.

    Args:
        level: Explicit level; falls back to ``$PLANEFUSION_LOG_LEVEL``, then INFO.
    """
    if level is None:
        level = os.environ.get(LEVEL_ENV, "INFO")
    if isinstance(level, str):
        level = logging.getLevelName(level.upper())
        if not isinstance(level, int):
            level = logging.INFO

    root = logging.getLogger("planefusion")
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler()
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(level)
