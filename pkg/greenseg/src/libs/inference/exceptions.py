import logging


class InferenceException(Exception):
    """Base exception of scene inference and vectorization"""

    def __init__(self, *args: object) -> None:
        logging.debug("Error occurs: %s", self.__class__.__name__)
        super().__init__(*args)

    @classmethod
    def message(cls) -> str:
        return "Inference failed"


class OutputError(InferenceException):
    """Result file could not be written"""

    @classmethod
    def message(cls) -> str:
        return "Cannot write inference output"
