from enum import Enum


class Architecture(str, Enum):
    """Segmentation network variants"""

    BASELINE = "baseline"
    MODEL_A = "model_a"
    MODEL_B = "model_b"

    def text(self) -> str:
        match self:
            case Architecture.BASELINE:
                return "U-Net baseline"
            case Architecture.MODEL_A:
                return "Residual U-Net (Model A)"
            case Architecture.MODEL_B:
                return "Dilated U-Net (Model B)"

    def published_parameters(self) -> tuple[int, int]:
        """(total, trainable) parameter counts reported for the reference builds"""
        match self:
            case Architecture.BASELINE:
                return 1_941_537, 1_941_537
            case Architecture.MODEL_A:
                return 2_441_313, 2_436_801
            case Architecture.MODEL_B:
                return 3_736_289, 3_732_321


class OpKind(str, Enum):
    """Primitive operations a graph node may apply"""

    CONV = "conv2d"
    TRANSPOSED_CONV = "transposed_conv2d"
    UPSAMPLE = "bilinear_upsample2x"
    MAX_POOL = "max_pool"
    AVG_POOL = "avg_pool"
    BATCH_NORM = "batch_norm"
    ACTIVATION = "leaky_relu"
    DROPOUT = "dropout"
    CONCAT = "concat_channels"
    ADD = "add"

    def has_params(self) -> bool:
        return self in (OpKind.CONV, OpKind.TRANSPOSED_CONV, OpKind.BATCH_NORM)
