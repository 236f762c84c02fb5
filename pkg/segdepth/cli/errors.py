"""Map failures to exit codes.

- 2: usage and configuration errors
- 3: file system and file format errors
- 4: numeric failure, a NaN or Inf in the loss, gradients or parameters
- 1: anything else

On failure exactly one line `error: <reason>` goes to stderr.
"""
import logging
from contextlib import contextmanager

import typer

from segdepth.core.node import NumericFailure
from segdepth.data.augment import AugmentError
from segdepth.data.storage import SampleFormatError
from segdepth.model.checkpoint import CheckpointFormatError
from segdepth.model.config import ConfigError
from segdepth.utils.dataclass import KeyValueError
from segdepth.vision.netpbm import NetpbmFormatError
from segdepth.vision.superpixel import SuperpixelError

logger = logging.getLogger(__name__)


EXIT_FAILURE = 1

EXIT_USAGE = 2

EXIT_IO = 3

EXIT_NUMERIC = 4

USAGE_ERRORS = (ConfigError, KeyValueError, SuperpixelError, AugmentError)

IO_ERRORS = (OSError, SampleFormatError, CheckpointFormatError, NetpbmFormatError)


class UsageError(Exception):
    """Command-line flags parse but cannot be used together."""


def exit_code_for(e: Exception) -> int:
    if isinstance(e, (UsageError,) + USAGE_ERRORS):
        return EXIT_USAGE
    if isinstance(e, IO_ERRORS):
        return EXIT_IO
    if isinstance(e, NumericFailure):
        return EXIT_NUMERIC
    return EXIT_FAILURE


def _reason(e: Exception) -> str:
    message = " ".join(str(e).split())
    return message or type(e).__name__


@contextmanager
def command_errors():
    """Turn exceptions raised by a command body into an exit code and one diagnostic line."""
    try:
        yield
    except (typer.Exit, typer.Abort):
        raise
    except Exception as e:
        logger.debug("Command failed", exc_info=True)
        typer.echo(f"error: {_reason(e)}", err=True)
        raise typer.Exit(code=exit_code_for(e)) from e
