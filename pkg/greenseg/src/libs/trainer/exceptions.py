import logging


class TrainerException(Exception):
    """Base exception of the training loop"""

    def __init__(self, *args: object) -> None:
        logging.debug("Error occurs: %s", self.__class__.__name__)
        super().__init__(*args)

    @classmethod
    def message(cls) -> str:
        return "Training failed"


class NumericFailure(TrainerException):
    """Loss or gradient became NaN or infinite"""

    @classmethod
    def message(cls) -> str:
        return "Non-finite value during training"
