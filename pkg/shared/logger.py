"""
Shared logging configuration and utilities.
"""

import logging
import sys
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional

DEFAULT_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def setup_logging(level: str = "INFO", log_file: Optional[str] = None, format_string: Optional[str] = None) -> None:
    """
    Set up logging for a command-line run.

    numpy floating-point warnings (overflow inside the integrator, for
    instance) are routed through the logging system so they land in the log
    file next to the run messages.

    Args:
        level (str): Logging level (DEBUG, INFO, WARNING, ERROR)
        log_file (str, optional): Path to log file. If None, logs to console only.
        format_string (str, optional): Custom log format string
    """
    logging_level = getattr(logging, level.upper(), logging.INFO)
    formatter = logging.Formatter(format_string or DEFAULT_FORMAT)

    root = logging.getLogger()
    root.setLevel(logging_level)
    root.handlers.clear()

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    root.addHandler(console_handler)

    if log_file:
        log_path = Path(log_file)
        log_path.parent.mkdir(parents=True, exist_ok=True)

        file_handler = logging.FileHandler(log_path, encoding="utf-8")
        file_handler.setFormatter(formatter)
        root.addHandler(file_handler)

        root.info(f"Logging to file: {log_path}")

    logging.captureWarnings(True)


def get_logger(name: str) -> logging.Logger:
    """
    Get a logger instance for a specific module.

    Args:
        name (str): Logger name (typically __name__)

    Returns:
        logging.Logger: Logger instance
    """
    return logging.getLogger(name)


@contextmanager
def log_duration(logger: logging.Logger, label: str, level: int = logging.INFO) -> Iterator[None]:
    """
    Log how long the wrapped block took.

    Args:
        logger (logging.Logger): Logger to write to
        label (str): Short description of the block
        level (int): Log level for the timing message
    """
    start = time.perf_counter()
    try:
        yield
    finally:
        logger.log(level, f"{label} finished in {time.perf_counter() - start:.2f}s")
