from pathlib import Path
import sys
from typing import TextIO, Union

from loguru import logger

MESSAGE_FORMAT = ('<green>{time:YYYY-MM-DD HH:mm:ss.SSS}</green> | '
                  '<cyan>{function}</cyan>:<cyan>{line}</cyan> '
                  '- <level>{message}</level>')


def verbosity_level(verbose: int) -> str:
    if verbose <= 0:
        return 'WARNING'
    if verbose == 1:
        return 'INFO'
    return 'DEBUG'


def add_logging_sink(sink: Union[TextIO, str, Path], verbose: int, colorize: bool = False,
                     serialize: bool = False) -> int:
    """Adds a logging sink to the global process logger.

    Parameters
    ----------
    sink
        Either a file path or a system stream like ``sys.stderr``.
    verbose
        Verbosity of the logger.
    colorize
        Whether to use the colorization options from :mod:`loguru`.
    serialize
        Whether the logs should be converted to JSON before they're dumped
        to the logging sink.

    Returns
    -------
        The loguru handler id, for removing the sink later.

    """
    return logger.add(sink, colorize=colorize, level=verbosity_level(verbose),
                      format=MESSAGE_FORMAT, serialize=serialize)


def configure_logging_to_terminal(verbose: int):
    """Sets up logging to ``sys.stderr``.

    Standard output is reserved for machine-readable results.

    Parameters
    ----------
    verbose
        Verbosity of the logger.

    """
    logger.remove()  # Clear default configuration
    add_logging_sink(sys.stderr, verbose, colorize=sys.stderr.isatty())
