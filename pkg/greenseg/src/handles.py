import functools
import logging
import sys
from typing import Callable

import pydantic

from greenseg.src.exceptions import (ConfigError, DataError, GreensegError,
                                     NumericError)
from greenseg.src.libs.autodiff import ContractViolation
from greenseg.src.libs.inference import InferenceException
from greenseg.src.libs.networks.exceptions import CheckpointError
from greenseg.src.libs.raster.exceptions import RasterError
from greenseg.src.libs.trainer import NumericFailure


def translate(e: Exception) -> GreensegError:
    """Map a library exception onto the operator-facing error classes."""
    match e:
        case GreensegError():
            return e
        case pydantic.ValidationError():
            return ConfigError(str(e))
        case NumericFailure():
            return NumericError(str(e))
        case RasterError() | CheckpointError() | InferenceException() | ContractViolation():
            return DataError(str(e))
        case ValueError():
            return DataError(str(e))
        case OSError():
            return DataError(f"{e.filename or ''}: {e.strerror or e}".lstrip(": "))
        case _:
            raise e


def exit_codes(func: Callable) -> Callable:
    """Run a command, turning its errors into the documented exit codes."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except Exception as e:  # pylint: disable=broad-exception-caught
            try:
                error = translate(e)
            except Exception:  # pylint: disable=broad-exception-caught
                logging.exception(str(e))
                sys.exit(1)
            logging.error("%s: %s", error.message(), error)
            sys.exit(error.exit_code)

    return wrapper
