import json
import logging
import os
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np
import pydantic

try:
    from .enums import DropReason, Split
    from .exceptions import RasterError
    from .models import TileOrigin, TileRecord
except (ImportError, ModuleNotFoundError):
    from enums import DropReason, Split
    from exceptions import RasterError
    from models import TileOrigin, TileRecord

ARRAYS = "tiles.npz"
MANIFEST = "manifest.json"


class StoredTile(pydantic.BaseModel):
    origin: TileOrigin
    split: Split
    dropped: Optional[DropReason] = None


class TileStore(pydantic.BaseModel):
    """Every tile cut from the prepared scenes, kept or not, with its split.

    Tiles hold conditioned spectral channels; derived channels and scaling
    are applied when batches are built.
    """
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True)

    tiles: list[TileRecord] = pydantic.Field(default_factory=list)
    entries: list[StoredTile] = pydantic.Field(default_factory=list)
    extras: dict[str, Any] = pydantic.Field(default_factory=dict)
    """scaler parameters, feature settings and other run facts"""

    def add(self, t: TileRecord, split: Split, dropped: Optional[DropReason] = None) -> None:
        self.tiles.append(t)
        self.entries.append(StoredTile(origin=t.origin, split=split, dropped=dropped))

    def select(self, split: Split, kept_only: bool = True) -> list[TileRecord]:
        return [t for t, e in zip(self.tiles, self.entries)
                if e.split is split and (e.dropped is None or not kept_only)]

    def save(self, directory: Union[str, os.PathLike]) -> None:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        if self.tiles:
            np.savez_compressed(
                directory / ARRAYS,
                channels=np.stack([t.channels for t in self.tiles]).astype(np.float32),
                masks=np.stack([t.mask for t in self.tiles]).astype(np.uint8),
                weights=np.stack([_weights(t) for t in self.tiles]).astype(np.float32),
            )
        manifest = {
            "entries": [e.model_dump(mode="json") for e in self.entries],
            "extras": self.extras,
        }
        with open(directory / MANIFEST, "w", encoding="utf-8") as f:
            json.dump(manifest, f, indent=4)
        logging.info("Tile store with %d tiles written to %s", len(self.tiles), directory)

    @classmethod
    def load(cls, directory: Union[str, os.PathLike]) -> "TileStore":
        directory = Path(directory)
        try:
            with open(directory / MANIFEST, "r", encoding="utf-8") as f:
                manifest = json.load(f)
        except FileNotFoundError as e:
            raise RasterError(f"{directory}: no tile store manifest") from e

        entries = [StoredTile.model_validate(e) for e in manifest["entries"]]
        tiles = []
        if entries:
            with np.load(directory / ARRAYS) as arrays:
                channels, masks, weights = arrays["channels"], arrays["masks"], arrays["weights"]
            if len(channels) != len(entries):
                raise RasterError(f"{directory}: manifest lists {len(entries)} tiles, "
                                  f"arrays hold {len(channels)}")
            tiles = [TileRecord(channels=c, mask=m, origin=e.origin,
                                weight_map=None if np.isnan(w).all() else w)
                     for c, m, w, e in zip(channels, masks, weights, entries)]
        return cls(tiles=tiles, entries=entries, extras=manifest.get("extras", {}))


def _weights(t: TileRecord) -> np.ndarray:
    return t.weight_map if t.weight_map is not None else np.full(t.mask.shape, np.nan)
