from enum import Enum


class Mode(str, Enum):
    """Execution mode of mode-dependent operations"""

    TRAIN = "train"
    INFER = "infer"

    def text(self) -> str:
        match self:
            case Mode.TRAIN:
                return "Training"
            case Mode.INFER:
                return "Inference"


class PoolKind(str, Enum):
    MAX = "max"
    AVG = "avg"
