# src/logger.py

import contextlib
import logging
import os
import sys
from logging.handlers import TimedRotatingFileHandler

from src import config

# --- Configuration ---
LOG_FILE = os.path.join(config.LOG_DIR, "pipeline.log")
RUN_LOG_NAME = "run.log"
FORMATTER = logging.Formatter(
    "%(asctime)s - %(name)s - %(levelname)s - %(message)s (%(filename)s:%(lineno)d)"
)

os.makedirs(config.LOG_DIR, exist_ok=True)


def get_console_handler() -> logging.Handler:
    handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(FORMATTER)
    return handler


def get_file_handler() -> logging.Handler:
    """Shared pipeline log, rotated at midnight with a week of backups."""
    handler = TimedRotatingFileHandler(LOG_FILE, when='midnight', backupCount=7, encoding='utf-8')
    handler.setFormatter(FORMATTER)
    return handler


def get_logger(logger_name: str) -> logging.Logger:
    """Configures and returns a logger instance. Level comes from ALIBI_LOG_LEVEL."""
    named = logging.getLogger(logger_name)
    named.setLevel(config.LOG_LEVEL.upper())

    if not named.handlers:
        named.addHandler(get_console_handler())
        named.addHandler(get_file_handler())

    named.propagate = False
    return named


@contextlib.contextmanager
def run_log(output_dir: str):
    """
    Mirrors everything logged inside the block into `<output_dir>/run.log`,
    so a run directory carries its own training history next to its manifest.
    """
    os.makedirs(output_dir, exist_ok=True)
    handler = logging.FileHandler(os.path.join(output_dir, RUN_LOG_NAME), encoding='utf-8')
    handler.setFormatter(FORMATTER)
    logger.addHandler(handler)
    try:
        yield handler.baseFilename
    finally:
        logger.removeHandler(handler)
        handler.close()


# Default logger for easy import
logger = get_logger("AlibiEmbeddingPipeline")
