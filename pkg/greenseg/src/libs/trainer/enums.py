from enum import Enum


class OptimizerKind(str, Enum):
    ADAM = "adam"
    RMSPROP = "rmsprop"

    def text(self) -> str:
        match self:
            case OptimizerKind.ADAM:
                return "Adam"
            case OptimizerKind.RMSPROP:
                return "RMSprop"


class Decision(str, Enum):
    """Outcome of the end-of-epoch plateau check"""

    CONTINUE = "continue"
    REDUCE_LR = "reduce_lr"
    STOP = "stop"
