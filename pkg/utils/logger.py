#! /usr/bin/env python
# -*- coding: utf-8 -*-

import logging
import os
import sys
from typing import Optional, Union

from core.models import LogLevel

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'


def _level(level: Union[LogLevel, str]) -> int:
    return getattr(logging, level.value if isinstance(level, LogLevel) else str(level).upper(), logging.INFO)


def setup_logger(name: str, log_file: Optional[str], level: Union[LogLevel, str] = LogLevel.INFO) -> logging.Logger:
    """File + console logger. The console goes to stderr; stdout is reserved for result lines.

    name "" configures the root logger, which every module logger propagates to.
    """
    formatter = logging.Formatter(LOG_FORMAT)
    logger = logging.getLogger(name)
    logger.setLevel(_level(level))
    close_logger(logger)

    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    logger.addHandler(console_handler)

    if log_file:
        log_dir = os.path.dirname(log_file)
        try:
            if log_dir:
                os.makedirs(log_dir, exist_ok=True)
            file_handler = logging.FileHandler(log_file)
        except OSError as e:
            logger.error(f"Cannot write log file {log_file}, logging to console only: {e}")
        else:
            file_handler.setFormatter(formatter)
            logger.addHandler(file_handler)

    return logger


def close_logger(logger: logging.Logger) -> None:
    for handler in logger.handlers[:]:
        handler.close()
        logger.removeHandler(handler)
