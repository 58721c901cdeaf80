"""
Logging configuration and utilities

Every record carries the case and config hash of the run that emitted it
(bound with run_context), so logs of a compare-cases invocation can be
split per case afterwards.

Author: Edgar McOchieng
"""

import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

from loguru import logger

LOG_FORMATS = {
    "simple": "<level>{message}</level>",
    "detailed": (
        "<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | "
        "<magenta>{extra[case]}</magenta> | "
        "<cyan>{name}</cyan>:<cyan>{function}</cyan>:<cyan>{line}</cyan> | <level>{message}</level>"
    ),
}

# Values of the run context outside any run
NO_RUN = {"case": "-", "config_hash": "-"}

_logger_initialized = False


def log_exception(exc: Exception, message: str = "Exception occurred"):
    """
    Log an exception with its traceback

    Args:
        exc: Exception instance
        message: Custom message to log
    """
    logger.opt(exception=exc).error(f"{message}: {exc}")


def setup_logger(log_level="INFO", log_file="logs/simulator.log", log_to_console=True, log_format="detailed"):
    """
    Configure the loguru sinks

    Args:
        log_level: Logging level (TRACE, DEBUG, INFO, WARNING, ERROR, CRITICAL)
        log_file: Path to a rotating log file (empty or None disables the file sink)
        log_to_console: Whether to log to stderr
        log_format: simple, detailed, or json (one serialized object per record,
                    run context included under record.extra)
    """
    global _logger_initialized

    logger.remove()
    logger.configure(extra=dict(NO_RUN))

    serialize = log_format == "json"
    fmt = LOG_FORMATS.get(log_format, LOG_FORMATS["detailed"])

    if log_to_console:
        logger.add(sys.stderr, format=fmt, level=log_level, colorize=not serialize, serialize=serialize)

    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        logger.add(
            log_file,
            format=fmt,
            level=log_level,
            serialize=serialize,
            rotation="10 MB",
            retention="30 days",
            compression="zip",
        )

    _logger_initialized = True
    return logger


def get_logger(name: Optional[str] = None):
    """
    Get a logger, configuring sinks from Config on first use

    Args:
        name: Logger name (usually __name__)
    """
    if not _logger_initialized:
        try:
            from config.settings import Config
            setup_logger(
                log_level=Config.LOG_LEVEL,
                log_file=Config.LOG_FILE,
                log_to_console=Config.LOG_TO_CONSOLE,
                log_format=Config.LOG_FORMAT,
            )
        except Exception:
            setup_logger()

    if name:
        return logger.bind(name=name)
    return logger


@contextmanager
def run_context(case: str, config_hash: str) -> Iterator[None]:
    """Tag every record emitted inside the block with a run's case and config hash"""
    with logger.contextualize(case=case, config_hash=config_hash):
        yield
