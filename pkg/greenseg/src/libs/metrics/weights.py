from typing import Optional

import numpy as np
from scipy import ndimage

try:
    from .models import SIGMA, W0, WeightMap
except (ImportError, ModuleNotFoundError):
    from models import SIGMA, W0, WeightMap

CROSS = ndimage.generate_binary_structure(2, 1)
"""4-connectivity"""


def connected_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """4-connected labels 1..K numbered in raster-scan order of first pixel."""
    labels, count = ndimage.label(np.asarray(mask) > 0, structure=CROSS)
    return labels.astype(np.int32), int(count)


def border_distances(labels: np.ndarray, count: Optional[int] = None) -> tuple[np.ndarray, np.ndarray]:
    """Exact Euclidean distance from every pixel to the border of the nearest
    and second nearest component.

    A component's border is every pixel of it with a 4-neighbour outside it
    (pixels beyond the image count as outside). Missing components give inf.
    """
    labels = np.asarray(labels)
    if count is None:
        count = int(labels.max(initial=0))
    first = np.full(labels.shape, np.inf)
    second = np.full(labels.shape, np.inf)
    for k in range(1, count + 1):
        component = labels == k
        if not component.any():
            continue
        border = component & ~ndimage.binary_erosion(component, structure=CROSS)
        dist = ndimage.distance_transform_edt(~border)
        second = np.where(dist < first, first, np.minimum(second, dist))
        first = np.minimum(first, dist)
    return first.astype(np.float32), second.astype(np.float32)


def class_balance_map(mask: np.ndarray) -> np.ndarray:
    """N / (2 * N_class) for the class of each pixel, class counts floored at 1."""
    positive = np.asarray(mask) > 0
    total = positive.size
    n_pos = max(int(positive.sum()), 1)
    n_neg = max(total - int(positive.sum()), 1)
    return np.where(positive, total / (2.0 * n_pos), total / (2.0 * n_neg)).astype(np.float32)


def unet_weight_map(mask: np.ndarray, w0: float = W0, sigma: float = SIGMA) -> WeightMap:
    """w = w_c + w0 * exp(-(d1 + d2)^2 / (2 sigma^2)); the border term is 0
    unless the mask holds at least two components."""
    balance = class_balance_map(mask)
    labels, count = connected_components(mask)
    weights = balance.astype(np.float64)
    if count >= 2:
        d1, d2 = border_distances(labels, count)
        weights = weights + w0 * np.exp(-(d1.astype(np.float64) + d2) ** 2 / (2.0 * sigma ** 2))
    return WeightMap(weights=weights.astype(np.float32), class_balance=balance,
                     w0=w0, sigma=sigma, components=count)
