import contextlib
import logging
import os
import time
from typing import Any, Optional, Union

import pydantic

from greenseg.src.libs.features import (FeatureConfig, ScalerParams,
                                        condition_raster)
from greenseg.src.libs.networks import Network, load_checkpoint
from greenseg.src.libs.raster import Raster

try:
    from .enums import Stage
    from .models import InferenceConfig, PolygonFeature, ProbabilityMap, TimingReport
    from .predict import stitch
    from .vectorize import vectorize
except (ImportError, ModuleNotFoundError):
    from enums import Stage
    from models import InferenceConfig, PolygonFeature, ProbabilityMap, TimingReport
    from predict import stitch
    from vectorize import vectorize


class SceneModel(pydantic.BaseModel):
    """A trained network with the feature pipeline it was trained on."""
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True)

    network: Network
    features: FeatureConfig
    scaler: ScalerParams
    threshold: float = 0.5
    best_epoch: Optional[int] = None
    train_config: dict[str, Any] = pydantic.Field(default_factory=dict)

    @classmethod
    def from_checkpoint(cls, path: Union[str, os.PathLike]) -> "SceneModel":
        checkpoint = load_checkpoint(path)
        meta = checkpoint.metadata
        return cls(network=Network(checkpoint.spec, checkpoint.params),
                   features=FeatureConfig.model_validate(meta.get("features", {})),
                   scaler=ScalerParams.model_validate(meta["scaler"]),
                   threshold=meta.get("threshold", 0.5),
                   best_epoch=meta.get("best_epoch"),
                   train_config=meta.get("train_config", {}))


class SceneResult(pydantic.BaseModel):

    probabilities: ProbabilityMap
    polygons: list[PolygonFeature]
    threshold: float
    timing: TimingReport


class _Clock:

    def __init__(self) -> None:
        self.stages: dict[str, float] = {}
        self.start = time.perf_counter()

    @contextlib.contextmanager
    def stage(self, stage: Stage):
        name = stage.value
        began = time.perf_counter()
        try:
            yield
        finally:
            self.stages[name] = self.stages.get(name, 0.0) + time.perf_counter() - began

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self.start


def predict_scene(raster: Raster,
                  model: SceneModel,
                  config: InferenceConfig = None) -> tuple[ProbabilityMap, TimingReport]:
    """Condition a raw scene and stitch its probability map."""
    config = config or InferenceConfig()
    clock, tiles = _Clock(), []
    with clock.stage(Stage.CONDITION):
        conditioned = condition_raster(raster, model.features, config.workers)
    with clock.stage(Stage.PREDICT):
        probabilities = stitch(conditioned, model.network, model.features, model.scaler,
                               config.batch_size, config.tta, config.workers,
                               on_batch=tiles.append)
    return probabilities, TimingReport(tiles=sum(tiles), wall_seconds=clock.elapsed, stages=clock.stages)


def infer_scene(raster: Raster, model: SceneModel, config: InferenceConfig = None) -> SceneResult:
    """Probability map, polygons and timings of one raw scene.

    Raises:
        TilingError: the scene is smaller than one tile
    """
    config = config or InferenceConfig()
    probabilities, timing = predict_scene(raster, model, config)
    clock = _Clock()
    threshold = model.threshold if config.threshold is None else config.threshold
    with clock.stage(Stage.VECTORIZE):
        polygons = vectorize(probabilities, threshold, config.cleanup_radius,
                             config.rectangles, raster.transform)

    timing.stages.update(clock.stages)
    timing.wall_seconds += clock.elapsed
    logging.info("Inferred %d polygons from %d tiles in %.2fs (%.1f tiles/s)",
                 len(polygons), timing.tiles, timing.wall_seconds, timing.tiles_per_second)
    return SceneResult(probabilities=probabilities, polygons=polygons,
                       threshold=threshold, timing=timing)
