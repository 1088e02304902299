import logging
import os
import sys
from typing import Optional

logger = logging.getLogger("kgalign")
logger.addHandler(logging.NullHandler())

_levels = {
    "off": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def get_level(verbose: bool = False) -> int:
    """
    Map the `KGA_LOG` environment variable onto a logging
    level, with `verbose` forcing debug output regardless
    """

    if verbose:
        return logging.DEBUG

    value = os.getenv("KGA_LOG", "off").strip().lower()
    try:
        return _levels[value]
    except KeyError:
        raise ValueError(
            "Unknown KGA_LOG value '{}', expected one of {}".format(
                value, ", ".join(_levels)
            )
        )


def configure(verbose: bool = False, log_file: Optional[str] = None):
    logger.setLevel(get_level(verbose))
    for handler in list(logger.handlers):
        if not isinstance(handler, logging.NullHandler):
            logger.removeHandler(handler)
            handler.close()

    # stdout carries command output, so logs go to stderr
    logger.addHandler(logging.StreamHandler(stream=sys.stderr))
    if log_file is not None:
        handler = logging.FileHandler(filename=log_file, mode="w")
        logger.addHandler(handler)
