from enum import Enum

import numpy as np


class DType(str, Enum):
    """Sample types a raster file may hold"""

    U16 = "u16"
    F32 = "f32"

    def code(self) -> int:
        match self:
            case DType.U16:
                return 1
            case DType.F32:
                return 2

    @classmethod
    def from_code(cls, code: int) -> "DType":
        for member in cls:
            if member.code() == code:
                return member
        raise ValueError(f"Unrecognized dtype code: {code}")

    def numpy(self) -> np.dtype:
        match self:
            case DType.U16:
                return np.dtype("<u2")
            case DType.F32:
                return np.dtype("<f4")


class DropReason(str, Enum):
    POSITIVE_RATE = "positive_rate"
    ANOMALY = "anomaly"


class Split(str, Enum):
    TRAIN = "train"
    VAL = "val"
