import logging
from collections.abc import Sequence

import numpy as np

from greenseg.src.libs.features import FeatureConfig, ScalerParams
from greenseg.src.libs.metrics import tile_losses
from greenseg.src.libs.networks import Network
from greenseg.src.libs.raster import TileRecord

try:
    from .batching import infer_logits, masks_of, weights_of
except (ImportError, ModuleNotFoundError):
    from batching import infer_logits, masks_of, weights_of


def mark_hard(t: TileRecord) -> TileRecord:
    return t.model_copy(update={"origin": t.origin.model_copy(update={"hard": True})})


def hem_round(network: Network,
              tiles: Sequence[TileRecord],
              features: FeatureConfig,
              scaler: ScalerParams,
              fraction: float = 0.2,
              batch_size: int = 32,
              workers: int = 1) -> list[TileRecord]:
    """Hard example mining: score unaugmented tiles with the combined loss in
    inference mode and return the round(fraction * n) worst, worst first,
    tagged as hard. Equal losses keep input order."""
    count = int(round(fraction * len(tiles)))
    if count == 0:
        return []
    logits = infer_logits(network, tiles, features, scaler, batch_size, workers)
    losses = tile_losses(logits, masks_of(tiles), weights_of(tiles))
    worst = np.argsort(-losses, kind="stable")[:count]
    logging.info("Mined %d hard tiles of %d, loss %.4f to %.4f",
                 count, len(tiles), losses[worst[-1]], losses[worst[0]])
    return [mark_hard(tiles[i]) for i in worst]
