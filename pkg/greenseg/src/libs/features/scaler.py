from collections.abc import Sequence

import numpy as np
import pydantic

from greenseg.src.libs._numeric import nearest_rank

EPSILON = 1e-6


class ScalerParams(pydantic.BaseModel):
    """Per-channel median and interquartile range of the training tiles"""

    median: list[float]
    iqr: list[float]
    channels: list[str]

    @pydantic.model_validator(mode="after")
    def _lengths(self) -> "ScalerParams":
        if not len(self.median) == len(self.iqr) == len(self.channels):
            raise ValueError("median, iqr and channels must have one entry per channel")
        if any(v < 0 for v in self.iqr):
            raise ValueError("interquartile range cannot be negative")
        return self

    def columns(self, ndim: int) -> tuple[np.ndarray, np.ndarray]:
        shape = (-1,) + (1,) * (ndim - 1)
        median = np.asarray(self.median, dtype=np.float64).reshape(shape)
        spread = np.maximum(np.asarray(self.iqr, dtype=np.float64), EPSILON).reshape(shape)
        return median, spread


def fit_scaler(stacks: Sequence[np.ndarray], channels: Sequence[str]) -> ScalerParams:
    """Fit on (C, H, W) feature stacks using nearest-rank quartiles over every
    pixel of every stack."""
    if not stacks:
        raise ValueError("scaler needs at least one tile")
    pixels = np.concatenate([np.asarray(s).reshape(s.shape[0], -1) for s in stacks], axis=1)
    q25, q50, q75 = (nearest_rank(pixels, pct, axis=1).astype(np.float64) for pct in (25, 50, 75))
    return ScalerParams(median=q50.tolist(), iqr=(q75 - q25).tolist(), channels=list(channels))


def apply_scaler(stack: np.ndarray, params: ScalerParams) -> np.ndarray:
    """(x - median) / max(IQR, 1e-6) per channel of a (C, H, W) stack."""
    stack = np.asarray(stack)
    if stack.shape[0] != len(params.channels):
        raise ValueError(f"stack has {stack.shape[0]} channels, scaler expects {len(params.channels)}")
    median, spread = params.columns(stack.ndim)
    return ((stack - median) / spread).astype(np.float32)


def invert_scaler(scaled: np.ndarray, params: ScalerParams) -> np.ndarray:
    median, spread = params.columns(np.ndim(scaled))
    return (np.asarray(scaled, dtype=np.float64) * spread + median).astype(np.float32)
