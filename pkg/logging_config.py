"""
Logging setup shared by the command-line entry points
"""
import logging
import os
from typing import Optional

import colorlog

import config

LOG_FORMAT = "%(log_color)s%(asctime)s %(levelname)-8s%(reset)s [%(name)s] %(message)s"
FILE_FORMAT = "%(asctime)s - %(levelname)s - [%(name)s] - %(message)s"


def setup_logging(
    level: Optional[str] = None,
    log_file: Optional[str] = None,
    log_to_file: Optional[bool] = None
) -> logging.Logger:
    """
    Configure the root logger with a coloured console handler and an optional file handler

    Args:
        level: Log level name (uses config.LOG_LEVEL if None)
        log_file: Log file path (uses config.LOG_FILE if None)
        log_to_file: Whether to write the log file (uses config.LOG_TO_FILE if None)

    Returns:
        The configured root logger
    """
    level = (level or config.LOG_LEVEL).upper()
    log_to_file = config.LOG_TO_FILE if log_to_file is None else log_to_file
    log_file = log_file or config.LOG_FILE

    root = logging.getLogger()
    root.setLevel(level)

    # Re-running the CLI in one process must not stack handlers
    for handler in list(root.handlers):
        if getattr(handler, "_meetupnet", False):
            root.removeHandler(handler)
            handler.close()

    console = colorlog.StreamHandler()
    console.setFormatter(colorlog.ColoredFormatter(
        LOG_FORMAT,
        datefmt="%H:%M:%S",
        log_colors={
            "DEBUG": "cyan",
            "INFO": "green",
            "WARNING": "yellow",
            "ERROR": "red",
            "CRITICAL": "bold_red",
        },
    ))
    console._meetupnet = True
    root.addHandler(console)

    if log_to_file:
        directory = os.path.dirname(log_file)
        if directory:
            os.makedirs(directory, exist_ok=True)
        file_handler = logging.FileHandler(log_file, mode="a", encoding="utf-8")
        file_handler.setFormatter(logging.Formatter(FILE_FORMAT))
        file_handler._meetupnet = True
        root.addHandler(file_handler)

    return root
