import math

import numpy as np


def nearest_rank(values: np.ndarray, pct: float, axis=None) -> np.ndarray:
    """Nearest-rank percentile: the ceil(pct/100 * N)-th smallest value
    (rank clamped to [1, N])."""
    values = np.asarray(values)
    if axis is None:
        values = values.reshape(-1)
        axis = 0
    n = values.shape[axis]
    if n == 0:
        raise ValueError("percentile of an empty array")
    rank = min(max(math.ceil(pct / 100.0 * n), 1), n)
    return np.take(np.partition(values, rank - 1, axis=axis), rank - 1, axis=axis)


LUMA = np.array([0.299, 0.587, 0.114])
"""R, G, B weights of the luminance reduction"""


def luminance(rgb: np.ndarray) -> np.ndarray:
    """Per-pixel luminance of a (3, H, W) stack."""
    return np.tensordot(LUMA.astype(rgb.dtype), rgb, axes=1)
