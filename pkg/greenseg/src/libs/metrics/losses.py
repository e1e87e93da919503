from typing import Optional

import numpy as np

from greenseg.src.libs.autodiff import ContractViolation, Tensor, add, record

SMOOTH = 1.0


def _targets(logits: np.ndarray, mask: np.ndarray, name: str) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.size != logits.size:
        raise ContractViolation(f"{name}: {mask.shape} does not match logits {logits.shape}")
    return mask.reshape(logits.shape).astype(logits.dtype)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    decay = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + decay), decay / (1.0 + decay))


def _bce_terms(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """-(y log s + (1 - y) log(1 - s)) with s = sigmoid(z), overflow free."""
    return np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))


def _dice_terms(p: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-tile intersection and sum, leading axis is the batch."""
    axes = tuple(range(1, p.ndim))
    return (y * p).sum(axis=axes), y.sum(axis=axes) + p.sum(axis=axes)


def weighted_bce(logits: Tensor, mask: np.ndarray, weight_map: Optional[np.ndarray] = None) -> Tensor:
    """Pixel-mean of the weighted binary cross-entropy of sigmoid(logits)."""
    z = logits.data
    y = _targets(z, mask, "weighted_bce mask")
    w = np.ones_like(z) if weight_map is None else _targets(z, weight_map, "weighted_bce weights")
    out = np.asarray((w * _bce_terms(z, y)).mean(), dtype=z.dtype)

    def backward(g: np.ndarray):
        return (g * w * (_sigmoid(z) - y) / z.size,)

    return record(out, (logits,), backward)


def dice_loss(logits: Tensor, mask: np.ndarray) -> Tensor:
    """1 - (2 I + 1) / (S + 1) per tile, averaged over the batch."""
    z = logits.data
    y = _targets(z, mask, "dice_loss mask")
    p = _sigmoid(z)
    inter, total = _dice_terms(p, y)
    out = np.asarray((1.0 - (2.0 * inter + SMOOTH) / (total + SMOOTH)).mean(), dtype=z.dtype)

    def backward(g: np.ndarray):
        shape = (-1,) + (1,) * (z.ndim - 1)
        num, den = (2.0 * inter + SMOOTH).reshape(shape), (total + SMOOTH).reshape(shape)
        d_p = -(2.0 * y * den - num) / den ** 2 / z.shape[0]
        return (g * d_p * p * (1.0 - p),)

    return record(out, (logits,), backward)


def total_loss(logits: Tensor, mask: np.ndarray, weight_map: Optional[np.ndarray] = None) -> Tensor:
    return add(weighted_bce(logits, mask, weight_map), dice_loss(logits, mask))


def tile_losses(logits: np.ndarray, masks: np.ndarray, weight_maps: Optional[np.ndarray] = None) -> np.ndarray:
    """Combined loss of each tile on its own, as float64 (N,)."""
    z = np.asarray(logits, dtype=np.float64)
    y = _targets(z, masks, "tile_losses masks")
    w = np.ones_like(z) if weight_maps is None else _targets(z, weight_maps, "tile_losses weights")
    axes = tuple(range(1, z.ndim))
    bce = (w * _bce_terms(z, y)).mean(axis=axes)
    inter, total = _dice_terms(_sigmoid(z), y)
    return bce + 1.0 - (2.0 * inter + SMOOTH) / (total + SMOOTH)
