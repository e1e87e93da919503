import logging


class NetworkException(Exception):
    """Base exception of the network package"""

    def __init__(self, *args: object) -> None:
        logging.debug("Error occurs: %s", self.__class__.__name__)
        super().__init__(*args)

    @classmethod
    def message(cls) -> str:
        return "Network error"


class CheckpointError(NetworkException):
    """Checkpoint file is unreadable or inconsistent with its network spec"""

    @classmethod
    def message(cls) -> str:
        return "Invalid checkpoint"


class CheckpointVersionError(CheckpointError):
    """Checkpoint was written by an incompatible format version"""

    @classmethod
    def message(cls) -> str:
        return "Unsupported checkpoint version"
