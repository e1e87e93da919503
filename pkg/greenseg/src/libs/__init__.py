from . import (autodiff, features, inference, metrics, networks, raster,
               trainer)

__all__ = [
    autodiff,
    features,
    inference,
    metrics,
    networks,
    raster,
    trainer,
]
