import numpy as np
import pydantic

from greenseg.src.libs._numeric import luminance

try:
    from .models import RAW_MAX, TileRecord
except (ImportError, ModuleNotFoundError):
    from models import RAW_MAX, TileRecord

SPECTRAL = 4
"""leading channels that photometric jitter touches (R, G, B, NIR)"""


class AugmentConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(extra="forbid")

    flip_probability: float = 0.5
    rotate: bool = True
    brightness_range: tuple[float, float] = (0.8, 1.4)
    contrast_range: tuple[float, float] = (0.7, 1.3)
    saturation_range: tuple[float, float] = (0.7, 1.3)
    value_range: tuple[float, float] = (0.0, float(RAW_MAX))


def rotate90(t: TileRecord, k: int) -> TileRecord:
    """Rotate channels, mask and weight map by k quarter turns."""
    return t.model_copy(update={
        "channels": np.ascontiguousarray(np.rot90(t.channels, k, axes=(1, 2))),
        "mask": np.ascontiguousarray(np.rot90(t.mask, k)),
        "weight_map": None if t.weight_map is None
        else np.ascontiguousarray(np.rot90(t.weight_map, k)),
    })


def flip(t: TileRecord, axis: int) -> TileRecord:
    """Mirror along image axis 0 (rows) or 1 (columns)."""
    return t.model_copy(update={
        "channels": np.ascontiguousarray(np.flip(t.channels, axis=axis + 1)),
        "mask": np.ascontiguousarray(np.flip(t.mask, axis=axis)),
        "weight_map": None if t.weight_map is None
        else np.ascontiguousarray(np.flip(t.weight_map, axis=axis)),
    })


def augment(t: TileRecord, rng: np.random.Generator, config: AugmentConfig = None) -> TileRecord:
    """Random flip and quarter-turn rotation followed by brightness, contrast
    and saturation jitter on the spectral channels.

    The draw order is fixed so a tile-specific generator reproduces the
    same result regardless of worker count.
    """
    config = config or AugmentConfig()
    out = t
    if rng.random() < config.flip_probability:
        out = flip(out, int(rng.integers(2)))
    if config.rotate:
        out = rotate90(out, int(rng.integers(4)))

    brightness = rng.uniform(*config.brightness_range)
    contrast = rng.uniform(*config.contrast_range)
    saturation = rng.uniform(*config.saturation_range)

    channels = out.channels.astype(np.float32, copy=True)
    spectral = channels[:SPECTRAL] * brightness
    mean = spectral.mean(axis=(1, 2), keepdims=True)
    spectral = (spectral - mean) * contrast + mean
    gray = luminance(spectral[:3])[None]
    spectral[:3] = gray + (spectral[:3] - gray) * saturation
    channels[:SPECTRAL] = np.clip(spectral, *config.value_range)
    return out.model_copy(update={"channels": channels})
