import logging


class AutodiffException(Exception):
    """Base exception of the tensor engine"""

    def __init__(self, *args: object) -> None:
        logging.debug("Error occurs: %s", self.__class__.__name__)
        super().__init__(*args)

    @classmethod
    def message(cls) -> str:
        return "Tensor engine error"


class ContractViolation(AutodiffException):
    """An operand breaks the shape, dtype or value contract of an operation"""

    @classmethod
    def message(cls) -> str:
        return "Operation contract violated"
