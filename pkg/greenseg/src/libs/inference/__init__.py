from . import enums, exceptions, models, pipeline, predict, vectorize
from .enums import Stage
from .exceptions import InferenceException, OutputError
from .models import (InferenceConfig, PolygonFeature, ProbabilityMap,
                     TimingReport)
from .pipeline import SceneModel, SceneResult, infer_scene, predict_scene
from .predict import ROTATIONS, predict_tiles, stitch
from .vectorize import (cleanup, emit_geojson, min_bounding_rectangle,
                        to_mask, trace_polygons, vectorize as vectorize_map)

__all__ = [
    enums, exceptions, models, pipeline, predict, vectorize,
]
