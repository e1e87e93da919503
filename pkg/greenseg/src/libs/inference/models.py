from typing import Optional

import numpy as np
import pydantic

from greenseg.src.libs.raster.models import Ring

try:
    from .enums import Stage
except (ImportError, ModuleNotFoundError):
    from enums import Stage


class ProbabilityMap(pydantic.BaseModel):
    """Scene-level foreground probabilities fused from overlapping tiles"""
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True)

    probabilities: np.ndarray
    """(H, W) float32 in [0, 1]"""
    counts: np.ndarray
    """(H, W) uint16, tiles covering each pixel"""

    @pydantic.model_validator(mode="after")
    def _check(self) -> "ProbabilityMap":
        if self.probabilities.shape != self.counts.shape:
            raise ValueError("probability and count maps differ in shape")
        return self

    @property
    def shape(self) -> tuple[int, int]:
        return self.probabilities.shape


class PolygonFeature(pydantic.BaseModel):
    """One detected region. Rings are closed with positive shoelace area in
    pixel coordinates (x = column, y = row)."""

    exterior: Ring
    world: Optional[Ring] = None
    area: float
    """pixel units"""
    component: int = 0
    degenerate: bool = False
    """zero-width rectangle from collinear input"""


class TimingReport(pydantic.BaseModel):

    tiles: int = 0
    wall_seconds: float = 0.0
    stages: dict[str, float] = pydantic.Field(default_factory=dict)

    @pydantic.computed_field
    @property
    def tiles_per_second(self) -> float:
        predict = self.stages.get(Stage.PREDICT.value, self.wall_seconds)
        return self.tiles / predict if predict > 0 else 0.0


class InferenceConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(extra="forbid")

    threshold: Optional[float] = None
    """None uses the threshold stored in the checkpoint"""
    tta: bool = True
    batch_size: int = 32
    cleanup_radius: int = 1
    rectangles: bool = True
    """replace each region by its minimum bounding rectangle"""
    workers: int = 1

    @pydantic.field_validator("threshold")
    @classmethod
    def _unit(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and not 0.0 <= v <= 1.0:
            raise ValueError("threshold must lie in [0, 1]")
        return v
