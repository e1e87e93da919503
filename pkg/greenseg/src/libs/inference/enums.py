from enum import Enum


class Stage(str, Enum):
    """Timed stages of scene inference"""

    CONDITION = "condition"
    PREDICT = "predict"
    VECTORIZE = "vectorize"

    def text(self) -> str:
        match self:
            case Stage.CONDITION:
                return "Conditioning"
            case Stage.PREDICT:
                return "Tile prediction"
            case Stage.VECTORIZE:
                return "Vectorization"
