import logging


class MetricsException(Exception):
    """Base exception of loss and metric computation"""

    def __init__(self, *args: object) -> None:
        logging.debug("Error occurs: %s", self.__class__.__name__)
        super().__init__(*args)

    @classmethod
    def message(cls) -> str:
        return "Metric computation failed"


class UndefinedMetric(MetricsException):
    """Metric has no value for the given data (e.g. AUC of a single class)"""

    @classmethod
    def message(cls) -> str:
        return "Metric undefined for the given data"
