import logging
from typing import Optional, Union

import numpy as np

from greenseg.src.libs._numeric import nearest_rank

try:
    from .enums import DropReason
    from .exceptions import TilingError
    from .models import RAW_MAX, DropRecord, Raster, TileOrigin, TileRecord
except (ImportError, ModuleNotFoundError):
    from enums import DropReason
    from exceptions import TilingError
    from models import RAW_MAX, DropRecord, Raster, TileOrigin, TileRecord

TILE_SIZE = 64
TILE_STRIDE = 32
SPREAD_FLOOR = 1e-3
"""smallest IQR the anomaly score divides by, as a share of the value range"""


def tile_origins(length: int, size: int = TILE_SIZE, stride: int = TILE_STRIDE) -> list[int]:
    """Offsets k * stride plus a final offset flush with the far edge when the
    remainder is not a multiple of the stride."""
    if length < size:
        raise TilingError(f"dimension {length} is smaller than the tile size {size}")
    origins = list(range(0, length - size + 1, stride))
    if origins[-1] != length - size:
        origins.append(length - size)
    return origins


def tile(raster: Union[Raster, np.ndarray],
         mask: Optional[np.ndarray] = None,
         size: int = TILE_SIZE,
         stride: int = TILE_STRIDE,
         raster_id: str = "scene") -> list[TileRecord]:
    """Cut a (bands, H, W) image and its mask into overlapping square tiles,
    row-major by origin.

    Raises:
        TilingError: the image is smaller than one tile
    """
    data = raster.data if isinstance(raster, Raster) else np.asarray(raster)
    _, height, width = data.shape
    if mask is None:
        mask = np.zeros((height, width), dtype=np.uint8)
    if mask.shape != (height, width):
        raise TilingError(f"mask shape {mask.shape} does not match image {height}x{width}")

    tiles = []
    for y0 in tile_origins(height, size, stride):
        for x0 in tile_origins(width, size, stride):
            tile_mask = mask[y0:y0 + size, x0:x0 + size].astype(np.uint8)
            tiles.append(TileRecord(
                channels=data[:, y0:y0 + size, x0:x0 + size].astype(np.float32),
                mask=tile_mask,
                origin=TileOrigin(raster_id=raster_id, x0=x0, y0=y0),
            ))
    return tiles


def band_means(raster: Union[Raster, np.ndarray],
               size: int = TILE_SIZE,
               stride: int = TILE_STRIDE,
               bands: int = 4) -> np.ndarray:
    """(tiles, bands) mean of every tile window, in `tile` order and float64."""
    data = raster.data if isinstance(raster, Raster) else np.asarray(raster)
    _, height, width = data.shape
    return np.array([data[:bands, y0:y0 + size, x0:x0 + size].mean(axis=(1, 2), dtype=np.float64)
                     for y0 in tile_origins(height, size, stride)
                     for x0 in tile_origins(width, size, stride)]).reshape(-1, bands)


def filter_tiles(tiles: list[TileRecord],
                 min_positive: float = 0.1,
                 anomaly_z: float = 6.0,
                 bands: int = 4,
                 fingerprints: Optional[np.ndarray] = None,
                 value_max: float = RAW_MAX) -> tuple[list[TileRecord], list[DropRecord]]:
    """Drop tiles with too few positive pixels, then tiles whose per-band mean
    lies more than `anomaly_z` robust z-scores from the median of all given
    tiles.

    The z-score of a band mean is |mean - median| / max(IQR, SPREAD_FLOOR *
    value_max) over all given tiles, so statistics do not depend on which
    tiles the rate filter removes and near-identical tiles never score high.
    `fingerprints` replaces the band means of the tile channels, e.g. with
    means taken before conditioning.

    Raises:
        TilingError: fingerprints do not hold one row of `bands` values per tile
    """
    if not tiles:
        return [], []
    if fingerprints is None:
        means = np.stack([t.channels[:bands].mean(axis=(1, 2)) for t in tiles]).astype(np.float64)
    else:
        means = np.asarray(fingerprints, dtype=np.float64)
        if means.shape != (len(tiles), bands):
            raise TilingError(f"fingerprints of shape {means.shape} do not match "
                              f"{len(tiles)} tiles of {bands} bands")
    center = nearest_rank(means, 50, axis=0)
    iqr = nearest_rank(means, 75, axis=0) - nearest_rank(means, 25, axis=0)
    z = np.abs(means - center) / np.maximum(iqr, SPREAD_FLOOR * value_max)

    kept, dropped = [], []
    for t, tile_z in zip(tiles, z):
        if t.positive_rate < min_positive:
            dropped.append(DropRecord(origin=t.origin, reason=DropReason.POSITIVE_RATE))
        elif np.any(tile_z > anomaly_z):
            dropped.append(DropRecord(origin=t.origin, reason=DropReason.ANOMALY))
        else:
            kept.append(t)
    logging.info("Tile filter kept %d of %d tiles", len(kept), len(tiles))
    return kept, dropped
