from typing import Optional

import numpy as np
import pydantic

try:
    from .enums import DropReason, DType
except (ImportError, ModuleNotFoundError):
    from enums import DropReason, DType

RAW_MAX = 4095
"""upper bound of raw sensor samples"""

Point = tuple[float, float]
Ring = list[Point]


class Affine(pydantic.BaseModel):
    """Pixel to world mapping: x = a*col + b*row + c, y = d*col + e*row + f"""
    model_config = pydantic.ConfigDict(frozen=True)

    a: float = 1.0
    b: float = 0.0
    c: float = 0.0
    d: float = 0.0
    e: float = 1.0
    f: float = 0.0

    @pydantic.model_validator(mode="after")
    def _invertible(self) -> "Affine":
        if self.determinant == 0.0:
            raise ValueError("affine transform is not invertible")
        return self

    @classmethod
    def from_tuple(cls, coeffs) -> "Affine":
        return cls(**dict(zip("abcdef", coeffs)))

    def to_tuple(self) -> tuple[float, ...]:
        return self.a, self.b, self.c, self.d, self.e, self.f

    @property
    def determinant(self) -> float:
        return self.a * self.e - self.b * self.d

    def forward(self, col, row):
        return (self.a * np.asarray(col) + self.b * np.asarray(row) + self.c,
                self.d * np.asarray(col) + self.e * np.asarray(row) + self.f)

    def inverse(self, x, y):
        dx, dy = np.asarray(x) - self.c, np.asarray(y) - self.f
        det = self.determinant
        return ((self.e * dx - self.b * dy) / det,
                (-self.d * dx + self.a * dy) / det)


class Raster(pydantic.BaseModel):
    """Band-sequential image, data shaped (bands, height, width)."""
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True)

    data: np.ndarray
    transform: Affine = pydantic.Field(default_factory=Affine)

    @pydantic.model_validator(mode="after")
    def _check(self) -> "Raster":
        if self.data.ndim != 3:
            raise ValueError(f"raster data must be (bands, height, width), got {self.data.shape}")
        if self.data.dtype not in (np.uint16, np.float32):
            raise ValueError(f"unsupported raster dtype {self.data.dtype}")
        return self

    @property
    def dtype(self) -> DType:
        return DType.U16 if self.data.dtype == np.uint16 else DType.F32

    @property
    def bands(self) -> int:
        return self.data.shape[0]

    @property
    def height(self) -> int:
        return self.data.shape[1]

    @property
    def width(self) -> int:
        return self.data.shape[2]


class Polygon(pydantic.BaseModel):
    """Closed rings in pixel coordinates (x = column, y = row)."""

    exterior: Ring
    holes: list[Ring] = pydantic.Field(default_factory=list)

    def rings(self) -> list[Ring]:
        return [self.exterior, *self.holes]


class LabelSet(pydantic.BaseModel):

    polygons: list[Polygon] = pydantic.Field(default_factory=list)
    crs: str = "pixel"
    """coordinate system the source file declared"""
    flagged: list[int] = pydantic.Field(default_factory=list)
    """indices of polygons with a self-intersecting ring"""


class TileOrigin(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    raster_id: str
    x0: int
    y0: int
    hard: bool = False
    """mined as a hard example"""
    synthetic: Optional[int] = None
    """index of a patch-paste variant built on this window, None for cut tiles"""


class TileRecord(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True)

    channels: np.ndarray
    """(C, size, size) float32"""
    mask: np.ndarray
    """(size, size) uint8 in {0, 1}"""
    weight_map: Optional[np.ndarray] = None
    origin: TileOrigin

    @property
    def positive_rate(self) -> float:
        return float(self.mask.mean())

    @property
    def size(self) -> int:
        return self.mask.shape[0]


class DropRecord(pydantic.BaseModel):
    origin: TileOrigin
    reason: DropReason


class SceneConfig(pydantic.BaseModel):
    """Parameters of a synthetic greenhouse scene"""
    model_config = pydantic.ConfigDict(extra="forbid")

    seed: int = 0
    width: int = 256
    height: int = 256
    count_range: tuple[int, int] = (3, 8)
    size_range: tuple[int, int] = (8, 28)
    """greenhouse side length in pixels"""
    angle_range: tuple[float, float] = (0.0, 0.0)
    """rotation in degrees, (0, 0) keeps greenhouses axis aligned"""
    gap: int = 2
    """minimum free pixels between greenhouses"""
    background_palette: list[tuple[int, int, int, int]] = pydantic.Field(default_factory=lambda: [
        (520, 780, 430, 2300),    # crops
        (640, 900, 520, 2650),    # grass
        (1450, 1300, 1150, 1900),  # bare soil
        (1100, 1050, 980, 1500),  # dry field
    ])
    """(R, G, B, NIR) background classes"""
    greenhouse_color: tuple[int, int, int, int] = (2900, 2950, 3000, 3150)
    noise: float = 40.0
    haze_probability: float = 0.3
    haze_strength: float = 600.0
    shadow_probability: float = 0.3
    shadow_strength: float = 0.45
    resolution: float = 1.5
    """ground sample distance used for the world transform"""

    @pydantic.model_validator(mode="after")
    def _ranges(self) -> "SceneConfig":
        for label, (lo, hi) in (("count_range", self.count_range), ("size_range", self.size_range),
                                ("angle_range", self.angle_range)):
            if lo > hi:
                raise ValueError(f"{label} lower bound exceeds upper bound")
        if self.size_range[0] < 2 or self.size_range[1] > min(self.width, self.height) // 2:
            raise ValueError("size_range must fit at least twice into the scene")
        return self
