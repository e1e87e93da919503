from . import channels, conditioning, enums, pipeline, scaler
from .channels import channel_names, ndvi, sobel, stack_channels, texture
from .conditioning import (clahe, contrast_stretch, morph, nl_means_band,
                           nl_means_denoise)
from .enums import Channel, MorphOp
from .pipeline import (FeatureConfig, batch_features, condition_raster,
                       enhance_band, featurize, fit_tile_scaler,
                       smooth_mask, tile_features)
from .scaler import ScalerParams, apply_scaler, fit_scaler, invert_scaler

__all__ = [
    channels, conditioning, enums, pipeline, scaler,
]
