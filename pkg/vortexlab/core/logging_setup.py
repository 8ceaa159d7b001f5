from __future__ import annotations

import logging
import sys
from contextlib import contextmanager
from logging.handlers import RotatingFileHandler
from pathlib import Path
from typing import Iterator

from vortexlab.core.config import settings

RUN_LOG_FILE = "run.log"


def _formatter() -> logging.Formatter:
    # chains and enumeration chunks log from pool threads
    return logging.Formatter(
        "%(asctime)s %(levelname)s %(name)s [%(threadName)s] %(message)s",
        "%Y-%m-%d %H:%M:%S",
    )


def configure_logging(level: str | None = None) -> None:
    """Configure process-wide logging handlers.

    A repeated call only changes the level.
    """
    root_logger = logging.getLogger()
    resolved = (level or settings.LOG_LEVEL).upper()
    if getattr(root_logger, "_vortexlab_configured", False):
        root_logger.setLevel(resolved)
        return

    log_file = Path(settings.LOG_FILE_PATH)
    log_file.parent.mkdir(parents=True, exist_ok=True)
    formatter = _formatter()

    file_handler = RotatingFileHandler(
        filename=log_file,
        maxBytes=settings.LOG_MAX_BYTES,
        backupCount=settings.LOG_BACKUP_COUNT,
        encoding="utf-8",
    )
    file_handler.setFormatter(formatter)

    # stdout carries the CLI's own messages
    stream_handler = logging.StreamHandler(sys.stderr)
    stream_handler.setFormatter(formatter)

    root_logger.setLevel(resolved)
    root_logger.addHandler(file_handler)
    root_logger.addHandler(stream_handler)
    setattr(root_logger, "_vortexlab_configured", True)


@contextmanager
def run_log(directory: Path) -> Iterator[Path]:
    """Copy the records emitted during one run into ``directory/run.log``."""
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / RUN_LOG_FILE
    handler = logging.FileHandler(path, mode="w", encoding="utf-8")
    handler.setFormatter(_formatter())
    root_logger = logging.getLogger()
    root_logger.addHandler(handler)
    try:
        yield path
    finally:
        root_logger.removeHandler(handler)
        handler.close()
