import numpy as np
from scipy import ndimage

from greenseg.src.libs._numeric import luminance

try:
    from .enums import Channel
except (ImportError, ModuleNotFoundError):
    from enums import Channel

SPECTRAL = (Channel.RED, Channel.GREEN, Channel.BLUE, Channel.NIR)
DEFAULT_STACK = (*SPECTRAL, Channel.NDVI, Channel.TEXTURE)


def ndvi(nir: np.ndarray, red: np.ndarray) -> np.ndarray:
    """(NIR - RED) / (NIR + RED), 0 where both bands are 0."""
    nir = np.asarray(nir, dtype=np.float64)
    red = np.asarray(red, dtype=np.float64)
    total = nir + red
    out = np.divide(nir - red, total, out=np.zeros_like(total), where=total != 0)
    return out.astype(np.float32)


def texture(image: np.ndarray, sigma: float = 2.0) -> np.ndarray:
    """High-pass residue: the image minus its Gaussian low-pass copy."""
    x = np.asarray(image, dtype=np.float64)
    low = ndimage.gaussian_filter(x, sigma=sigma, mode="reflect", truncate=4.0)
    return (x - low).astype(np.float32)


def sobel(rgb: np.ndarray) -> np.ndarray:
    """Gradient magnitude of the RGB luminance."""
    lum = luminance(np.asarray(rgb, dtype=np.float64))
    gx = ndimage.sobel(lum, axis=1, mode="reflect")
    gy = ndimage.sobel(lum, axis=0, mode="reflect")
    return np.hypot(gx, gy).astype(np.float32)


def stack_channels(spectral: np.ndarray,
                   texture_sigma: float = 2.0,
                   include_sobel: bool = False) -> np.ndarray:
    """(R, G, B, NIR) -> (R, G, B, NIR, NDVI, texture[, sobel]) as float32."""
    spectral = np.asarray(spectral, dtype=np.float32)
    if spectral.shape[0] != len(SPECTRAL):
        raise ValueError(f"expected {len(SPECTRAL)} spectral bands, got {spectral.shape[0]}")
    rgb = spectral[:3]
    derived = [ndvi(spectral[3], spectral[0]),
               texture(luminance(rgb.astype(np.float64)), texture_sigma)]
    if include_sobel:
        derived.append(sobel(rgb))
    return np.concatenate([spectral, np.stack(derived)]).astype(np.float32)


def channel_names(include_sobel: bool = False) -> list[str]:
    names = [c.value for c in DEFAULT_STACK]
    if include_sobel:
        names.append(Channel.SOBEL.value)
    return names
