import functools
import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Union

import numpy as np
from scipy import ndimage

from greenseg.src.libs._numeric import nearest_rank
from greenseg.src.libs.raster import RAW_MAX, Raster

try:
    from .enums import MorphOp
except (ImportError, ModuleNotFoundError):
    from enums import MorphOp

BINS = 256


def _max_value(band: np.ndarray, max_value: Optional[float]) -> float:
    if max_value is not None:
        return float(max_value)
    return float(RAW_MAX) if np.issubdtype(band.dtype, np.integer) else 1.0


def _restore(values: np.ndarray, like: np.ndarray, max_value: float) -> np.ndarray:
    if np.issubdtype(like.dtype, np.integer):
        return np.clip(np.rint(values), 0, max_value).astype(like.dtype)
    return values.astype(like.dtype if np.issubdtype(like.dtype, np.floating) else np.float32)


def nl_means_band(band: np.ndarray, h: float, patch: int = 7, search: int = 21) -> np.ndarray:
    """Non-local means of one band in float64.

    Each pixel becomes the average of the pixels in its search window, each
    weighted by exp(-d / h^2) where d is the mean squared difference between
    the two surrounding patches. `h` is in the band's own units.
    """
    if patch % 2 == 0 or search % 2 == 0:
        raise ValueError(f"patch ({patch}) and search ({search}) sizes must be odd")
    x = np.asarray(band, dtype=np.float64)
    if h <= 0:
        return x.copy()

    half_p, half_s = patch // 2, search // 2
    height, width = x.shape
    padded = np.pad(x, half_s + half_p, mode="reflect")
    span_y, span_x = height + 2 * half_p, width + 2 * half_p
    centre = padded[half_s:half_s + span_y, half_s:half_s + span_x]
    inner = (slice(half_p, half_p + height), slice(half_p, half_p + width))

    total = np.zeros_like(x)
    norm = np.zeros_like(x)
    for dy in range(-half_s, half_s + 1):
        for dx in range(-half_s, half_s + 1):
            shifted = padded[half_s + dy:half_s + dy + span_y, half_s + dx:half_s + dx + span_x]
            dist = ndimage.uniform_filter((centre - shifted) ** 2, size=patch, mode="reflect")[inner]
            weight = np.exp(-dist / (h * h))
            total += weight * shifted[inner]
            norm += weight
    return total / norm


def nl_means_denoise(raster: Raster,
                     h: float = 10.0,
                     patch: int = 7,
                     search: int = 21,
                     max_value: Optional[float] = None,
                     workers: int = 1) -> Raster:
    """Denoise every band of a raster, bands on up to `workers` threads.

    `h` is given on an 8-bit scale and stretched to the band range, so the
    same value works for 12-bit and 8-bit data.
    """
    def denoise(band: np.ndarray) -> np.ndarray:
        top = _max_value(band, max_value)
        return _restore(nl_means_band(band, h * top / 255.0, patch, search), band, top)

    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        bands = list(pool.map(denoise, raster.data))
    return raster.model_copy(update={"data": np.stack(bands)})


def _tile_edges(length: int, count: int) -> np.ndarray:
    return np.linspace(0, length, count + 1).round().astype(int)


def _blend_axis(length: int, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lower tile index, upper tile index and upper weight for each position."""
    centres = (edges[:-1] + edges[1:]) / 2.0 - 0.5
    position = np.interp(np.arange(length), centres, np.arange(len(centres)))
    lower = np.floor(position).astype(int)
    upper = np.minimum(lower + 1, len(centres) - 1)
    return lower, upper, position - lower


def clahe(band: np.ndarray,
          tiles: tuple[int, int] = (8, 8),
          clip_limit: float = 2.0,
          max_value: Optional[float] = None) -> np.ndarray:
    """Contrast limited adaptive histogram equalization on 256 bins.

    Histogram counts above clip_limit * tile_pixels / 256 are cut and spread
    evenly over all bins. Tile mappings are blended bilinearly between tile
    centres. A clip limit of inf or <= 0 disables clipping.
    """
    top = _max_value(band, max_value)
    values = np.asarray(band, dtype=np.float64)
    bins = np.clip(np.floor(values * BINS / top).astype(int), 0, BINS - 1)
    height, width = bins.shape
    rows = _tile_edges(height, min(tiles[0], height))
    cols = _tile_edges(width, min(tiles[1], width))

    luts = np.empty((len(rows) - 1, len(cols) - 1, BINS))
    for i, (r0, r1) in enumerate(zip(rows[:-1], rows[1:])):
        for j, (c0, c1) in enumerate(zip(cols[:-1], cols[1:])):
            hist = np.bincount(bins[r0:r1, c0:c1].ravel(), minlength=BINS).astype(np.float64)
            pixels = hist.sum()
            if np.isfinite(clip_limit) and clip_limit > 0:
                limit = max(clip_limit * pixels / BINS, 1.0)
                excess = np.maximum(hist - limit, 0.0).sum()
                hist = np.minimum(hist, limit) + excess / BINS
            luts[i, j] = np.cumsum(hist) * (BINS - 1) / pixels

    y0, y1, wy = _blend_axis(height, rows)
    x0, x1, wx = _blend_axis(width, cols)
    y0, y1, wy = y0[:, None], y1[:, None], wy[:, None]
    out = ((1 - wy) * (1 - wx) * luts[y0, x0, bins] + (1 - wy) * wx * luts[y0, x1, bins]
           + wy * (1 - wx) * luts[y1, x0, bins] + wy * wx * luts[y1, x1, bins])
    return _restore(out * top / (BINS - 1), np.asarray(band), top)


def contrast_stretch(band: np.ndarray,
                     lo_pct: float = 2.0,
                     hi_pct: float = 98.0,
                     max_value: Optional[float] = None) -> np.ndarray:
    """Map the [lo_pct, hi_pct] nearest-rank percentile range linearly onto
    [0, max_value], clipping outside."""
    top = _max_value(band, max_value)
    values = np.asarray(band, dtype=np.float64)
    lo, hi = float(nearest_rank(values, lo_pct)), float(nearest_rank(values, hi_pct))
    if hi <= lo:
        logging.warning("Contrast stretch: percentiles coincide at %s, band set to mid-range", lo)
        return _restore(np.full_like(values, top / 2.0), np.asarray(band), top)
    out = np.clip((values - lo) / (hi - lo), 0.0, 1.0) * top
    return _restore(out, np.asarray(band), top)


def morph(image: np.ndarray, op: Union[MorphOp, str], radius: int = 1) -> np.ndarray:
    """Erode, dilate, open or close with a (2 * radius + 1) square element.

    Binary input ({0, 1} or bool) uses binary morphology with pixels outside
    the image counted as foreground during erosion, so objects touching the
    border are not eaten from outside. Other input uses grey morphology.
    """
    op = MorphOp(op)
    image = np.asarray(image)
    if radius <= 0:
        return image.copy()
    binary = image.dtype == bool or np.isin(image, (0, 1)).all()

    if binary:
        structure = np.ones((3, 3), dtype=bool)
        erode = functools.partial(ndimage.binary_erosion, structure=structure,
                                  iterations=radius, border_value=1)
        dilate = functools.partial(ndimage.binary_dilation, structure=structure, iterations=radius)
        source = image.astype(bool)
    else:
        size = (2 * radius + 1, 2 * radius + 1)
        erode = functools.partial(ndimage.grey_erosion, size=size, mode="nearest")
        dilate = functools.partial(ndimage.grey_dilation, size=size, mode="nearest")
        source = image

    match op:
        case MorphOp.ERODE:
            out = erode(source)
        case MorphOp.DILATE:
            out = dilate(source)
        case MorphOp.OPEN:
            out = dilate(erode(source))
        case MorphOp.CLOSE:
            out = erode(dilate(source))
        case _:
            raise ValueError(f"Unrecognized morphological operation: {op}")
    return out.astype(image.dtype)
