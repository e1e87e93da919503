import logging


class GreensegError(Exception):
    """Base of errors reported to the operator, each with a stable exit code"""

    exit_code: int = 1

    def __init__(self, *args: object) -> None:
        logging.debug("Error occurs: %s", self.__class__.__name__)
        super().__init__(*args)

    @classmethod
    def message(cls) -> str:
        return "Command failed"


class ConfigError(GreensegError):
    """Invalid run configuration or command-line values"""

    exit_code = 2

    @classmethod
    def message(cls) -> str:
        return "Configuration error"


class DataError(GreensegError):
    """Unreadable, missing or inconsistent input or output files"""

    exit_code = 3

    @classmethod
    def message(cls) -> str:
        return "Data error"


class NumericError(GreensegError):
    """Training diverged"""

    exit_code = 4

    @classmethod
    def message(cls) -> str:
        return "Numeric failure"
