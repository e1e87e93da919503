import logging
from collections.abc import Callable
from typing import Protocol, Union

import numpy as np
from scipy.special import expit

from greenseg.src.libs.features import (FeatureConfig, ScalerParams,
                                        batch_features)
from greenseg.src.libs.raster import Raster
from greenseg.src.libs.raster.tiling import TILE_SIZE, TILE_STRIDE, tile_origins

try:
    from .models import ProbabilityMap
except (ImportError, ModuleNotFoundError):
    from models import ProbabilityMap

ROTATIONS = (0, 1, 2, 3)
"""quarter turns averaged by test-time augmentation, in summation order"""


class Predictor(Protocol):

    def logits(self, x: np.ndarray) -> np.ndarray: ...


def predict_tiles(network: Predictor, x: np.ndarray, tta: bool = True) -> np.ndarray:
    """Foreground probabilities (N, H, W) of a scaled (N, C, H, W) batch.

    With `tta` every tile is also predicted rotated by 90, 180 and 270
    degrees, each prediction rotated back and the four averaged.
    """
    x = np.asarray(x, dtype=np.float32)
    if not tta:
        return expit(network.logits(x)[:, 0].astype(np.float64)).astype(np.float32)

    total = np.zeros((x.shape[0], x.shape[2], x.shape[3]), dtype=np.float64)
    for k in ROTATIONS:
        rotated = np.ascontiguousarray(np.rot90(x, k, axes=(2, 3)))
        probs = expit(network.logits(rotated)[:, 0].astype(np.float64))
        total += np.rot90(probs, -k, axes=(1, 2))
    return (total / len(ROTATIONS)).astype(np.float32)


def stitch(scene: Union[Raster, np.ndarray],
           network: Predictor,
           features: FeatureConfig,
           scaler: ScalerParams,
           batch_size: int = 32,
           tta: bool = True,
           workers: int = 1,
           size: int = TILE_SIZE,
           stride: int = TILE_STRIDE,
           on_batch: Callable[[int], None] = None) -> ProbabilityMap:
    """Predict every tile of a conditioned scene and average overlapping
    predictions per pixel.

    Edge tiles are clamped flush with the scene border, so every pixel is
    covered at least once.

    Raises:
        TilingError: the scene is smaller than one tile
    """
    data = scene.data if isinstance(scene, Raster) else np.asarray(scene)
    height, width = data.shape[1:]
    origins = [(y0, x0) for y0 in tile_origins(height, size, stride)
               for x0 in tile_origins(width, size, stride)]

    sums = np.zeros((height, width), dtype=np.float64)
    counts = np.zeros((height, width), dtype=np.uint16)
    for start in range(0, len(origins), batch_size):
        part = origins[start:start + batch_size]
        windows = [data[:, y0:y0 + size, x0:x0 + size] for y0, x0 in part]
        probs = predict_tiles(network, batch_features(windows, features, scaler, workers), tta)
        for (y0, x0), p in zip(part, probs):
            sums[y0:y0 + size, x0:x0 + size] += p
            counts[y0:y0 + size, x0:x0 + size] += 1
        if on_batch is not None:
            on_batch(len(part))

    logging.info("Stitched %d tiles into a %dx%d probability map", len(origins), height, width)
    return ProbabilityMap(probabilities=(sums / counts).astype(np.float32), counts=counts)
