import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np
import pydantic

from greenseg.src.libs.raster import RAW_MAX, Raster, TileRecord

try:
    from .channels import channel_names, stack_channels
    from .conditioning import clahe, contrast_stretch, morph, nl_means_denoise
    from .enums import MorphOp
    from .scaler import ScalerParams, apply_scaler, fit_scaler
except (ImportError, ModuleNotFoundError):
    from channels import channel_names, stack_channels
    from conditioning import clahe, contrast_stretch, morph, nl_means_denoise
    from enums import MorphOp
    from scaler import ScalerParams, apply_scaler, fit_scaler


class FeatureConfig(pydantic.BaseModel):
    """Conditioning and derived-channel settings, stored with the tiles so
    inference repeats them exactly"""
    model_config = pydantic.ConfigDict(extra="forbid")

    denoise: bool = True
    nlm_h: float = 10.0
    """filter strength on an 8-bit scale"""
    nlm_patch: int = 7
    nlm_search: int = 21
    equalize: bool = True
    clahe_tiles: tuple[int, int] = (8, 8)
    clahe_clip: float = 2.0
    stretch: bool = True
    stretch_pct: tuple[float, float] = (2.0, 98.0)
    mask_open_radius: int = 1
    texture_sigma: float = 2.0
    include_sobel: bool = False

    @pydantic.field_validator("nlm_patch", "nlm_search")
    @classmethod
    def _odd(cls, v: int) -> int:
        if v < 1 or v % 2 == 0:
            raise ValueError("window sizes must be odd and positive")
        return v

    @property
    def channels(self) -> list[str]:
        return channel_names(self.include_sobel)


def enhance_band(band: np.ndarray, config: FeatureConfig) -> np.ndarray:
    """Equalize and stretch one 12-bit band."""
    out = np.asarray(band)
    if config.equalize:
        out = clahe(out, config.clahe_tiles, config.clahe_clip, max_value=RAW_MAX)
    if config.stretch:
        out = contrast_stretch(out, *config.stretch_pct, max_value=RAW_MAX)
    return out.astype(np.uint16)


def condition_raster(raster: Raster, config: Optional[FeatureConfig] = None, workers: int = 1) -> Raster:
    """Denoise, equalize and stretch every band; bands run on up to `workers` threads."""
    config = config or FeatureConfig()
    if config.denoise:
        raster = nl_means_denoise(raster, config.nlm_h, config.nlm_patch, config.nlm_search,
                                  max_value=RAW_MAX, workers=workers)
    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        bands = list(pool.map(lambda b: enhance_band(b, config), raster.data))
    logging.debug("Conditioned %d bands of a %dx%d raster", len(bands), raster.height, raster.width)
    return raster.model_copy(update={"data": np.stack(bands)})


def smooth_mask(mask: np.ndarray, config: Optional[FeatureConfig] = None) -> np.ndarray:
    config = config or FeatureConfig()
    return morph(np.asarray(mask, dtype=np.uint8), MorphOp.OPEN, config.mask_open_radius)


def featurize(spectral: np.ndarray, config: Optional[FeatureConfig] = None) -> np.ndarray:
    """(4, H, W) conditioned bands to the unscaled feature stack."""
    config = config or FeatureConfig()
    return stack_channels(spectral, config.texture_sigma, config.include_sobel)


def fit_tile_scaler(tiles: Sequence[TileRecord], config: Optional[FeatureConfig] = None) -> ScalerParams:
    config = config or FeatureConfig()
    params = fit_scaler([featurize(t.channels, config) for t in tiles], config.channels)
    logging.info("Scaler fitted on %d tiles: median %s, IQR %s",
                 len(tiles), np.round(params.median, 3).tolist(), np.round(params.iqr, 3).tolist())
    return params


def tile_features(spectral: np.ndarray, config: FeatureConfig, scaler: ScalerParams) -> np.ndarray:
    return apply_scaler(featurize(spectral, config), scaler)


def batch_features(spectral: Sequence[np.ndarray],
                   config: FeatureConfig,
                   scaler: ScalerParams,
                   workers: int = 1) -> np.ndarray:
    """Featurize and scale tiles into an (N, C, H, W) float32 batch in input order."""
    with ThreadPoolExecutor(max_workers=max(workers, 1)) as pool:
        stacks = list(pool.map(lambda s: tile_features(s, config, scaler), spectral))
    return np.stack(stacks).astype(np.float32)
