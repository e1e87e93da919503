from . import (augment, enums, exceptions, geojson, io, models, rasterize,
               store, synthetic, tiling)
from .augment import AugmentConfig, augment as augment_tile, flip, rotate90
from .enums import DropReason, DType, Split
from .geojson import read_labels, write_labels
from .io import read_raster, write_raster
from .models import (RAW_MAX, Affine, DropRecord, LabelSet, Polygon, Raster,
                     SceneConfig, TileOrigin, TileRecord)
from .rasterize import rasterize as rasterize_labels
from .store import TileStore
from .synthetic import (Patch, cut_patches, generate_scene, patch_paste,
                        synthesize_tiles)
from .tiling import band_means, filter_tiles, tile, tile_origins

__all__ = [
    augment, enums, exceptions, geojson, io, models, rasterize, store,
    synthetic, tiling,
]
