import numpy as np
import pytest


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


def make_tiles(count: int, seed: int = 0, size: int = 64, raster_id: str = "toy") -> list:
    """Tiles holding one bright square greenhouse on a dim noisy field."""
    from greenseg.src.libs.metrics import unet_weight_map
    from greenseg.src.libs.raster import TileOrigin, TileRecord

    gen = np.random.default_rng(seed)
    tiles = []
    for i in range(count):
        channels = gen.normal(800.0, 40.0, (4, size, size))
        mask = np.zeros((size, size), dtype=np.uint8)
        side = int(gen.integers(size // 5, size // 3))
        y0, x0 = gen.integers(0, size - side, size=2)
        mask[y0:y0 + side, x0:x0 + side] = 1
        channels[:, mask > 0] = gen.normal(3000.0, 40.0, (4, int(mask.sum())))
        tiles.append(TileRecord(channels=channels.astype(np.float32), mask=mask,
                                weight_map=unet_weight_map(mask).weights,
                                origin=TileOrigin(raster_id=raster_id, x0=32 * i, y0=0)))
    return tiles


@pytest.fixture
def toy_tiles() -> list:
    return make_tiles(8)
