from collections.abc import Iterator, Sequence

import numpy as np

from greenseg.src.libs.features import (FeatureConfig, ScalerParams,
                                        batch_features)
from greenseg.src.libs.networks import Network
from greenseg.src.libs.raster import TileRecord


def batches(count: int, size: int) -> Iterator[slice]:
    for start in range(0, count, size):
        yield slice(start, min(start + size, count))


def masks_of(tiles: Sequence[TileRecord]) -> np.ndarray:
    return np.stack([t.mask for t in tiles]).astype(np.float32)[:, None]


def weights_of(tiles: Sequence[TileRecord]) -> np.ndarray:
    """(N, 1, H, W) weight maps, ones for tiles without one."""
    return np.stack([np.ones(t.mask.shape, dtype=np.float32) if t.weight_map is None
                     else t.weight_map.astype(np.float32) for t in tiles])[:, None]


def infer_logits(network: Network,
                 tiles: Sequence[TileRecord],
                 features: FeatureConfig,
                 scaler: ScalerParams,
                 batch_size: int = 32,
                 workers: int = 1) -> np.ndarray:
    """Inference-mode logits (N, 1, H, W) of unaugmented tiles."""
    out = []
    for part in batches(len(tiles), batch_size):
        x = batch_features([t.channels for t in tiles[part]], features, scaler, workers)
        out.append(network.logits(x))
    return np.concatenate(out) if out else np.zeros((0, 1, 0, 0), dtype=np.float32)
