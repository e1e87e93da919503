import json
import os
from collections.abc import Iterable
from pathlib import Path
from typing import Any, Iterator, Mapping, Optional, Union

import pydantic

from greenseg.src.exceptions import ConfigError
from greenseg.src.libs.features import FeatureConfig
from greenseg.src.libs.inference import InferenceConfig
from greenseg.src.libs.networks import Architecture
from greenseg.src.libs.raster import SceneConfig
from greenseg.src.libs.trainer import TrainConfig

RESOLVED = "config.resolved.json"


class PrepareConfig(pydantic.BaseModel):
    """Tiling, filtering and split settings of the prepare command"""
    model_config = pydantic.ConfigDict(extra="forbid")

    size: int = 64
    stride: int = 32
    min_positive: float = 0.1
    anomaly_z: float = 6.0
    val_fraction: float = 0.2
    """share of scenes held out for validation"""
    synthetic_per_scene: int = pydantic.Field(default=0, ge=0)
    """patch-paste tiles added to the training split per training scene"""
    synthetic_patches: int = pydantic.Field(default=3, ge=1)
    """greenhouse cutouts pasted onto each synthetic tile"""

    @pydantic.field_validator("val_fraction")
    @classmethod
    def _fraction(cls, v: float) -> float:
        if not 0.0 <= v < 1.0:
            raise ValueError("val_fraction must lie in [0, 1)")
        return v


class _Document(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(extra="forbid")

    seed: Optional[int] = None
    workers: Optional[int] = None
    scene: SceneConfig = pydantic.Field(default_factory=SceneConfig)
    prepare: PrepareConfig = pydantic.Field(default_factory=PrepareConfig)
    features: FeatureConfig = pydantic.Field(default_factory=FeatureConfig)
    train: dict[str, Any] = pydantic.Field(default_factory=dict)
    """TrainConfig overrides on top of the architecture preset"""
    inference: InferenceConfig = pydantic.Field(default_factory=InferenceConfig)


def parse_override(assignment: str) -> tuple[list[str], Any]:
    """`a.b=value` -> (['a', 'b'], value), the value read as a JSON literal
    when it parses as one and kept as a string otherwise."""
    key, sep, raw = assignment.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override '{assignment}' is not of the form key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip().split("."), value


class RunConfig(Mapping):
    """Read-only view of one run's parameters: a JSON document with
    `--set` overrides applied, validated group by group."""
    _data: dict[str, Any]

    __keys__ = list(_Document.model_fields)

    def __init__(self,
                 path: Optional[Union[str, os.PathLike]] = None,
                 overrides: Iterable[str] = ()) -> None:
        self._data = {}
        if path is not None:
            self._load(Path(path))
        for assignment in overrides:
            self._assign(*parse_override(assignment))
        self._document = self._validate()

    def __getitem__(self, __key: str) -> Any:
        return self._data.__getitem__(__key)

    def __iter__(self) -> Iterator:
        return self._data.__iter__()

    def __len__(self) -> int:
        return self._data.__len__()

    @property
    def seed(self) -> Optional[int]:
        return self._document.seed

    @property
    def workers(self) -> Optional[int]:
        return self._document.workers

    @property
    def scene(self) -> SceneConfig:
        return self._document.scene

    @property
    def prepare(self) -> PrepareConfig:
        return self._document.prepare

    @property
    def features(self) -> FeatureConfig:
        return self._document.features

    @property
    def inference(self) -> InferenceConfig:
        return self._document.inference

    def train(self, arch: Optional[Union[Architecture, str]] = None, **overrides: Any) -> TrainConfig:
        """Preset of `arch` (or the configured one) with the document's and
        the given overrides applied."""
        values = {**self._document.train, **overrides}
        arch = arch or values.pop("arch", Architecture.MODEL_B)
        values.pop("arch", None)
        try:
            return TrainConfig.preset(arch, **values)
        except (pydantic.ValidationError, ValueError) as e:
            raise ConfigError(f"train: {e}") from e

    def resolved(self, **facts: Any) -> dict[str, Any]:
        return {**self._document.model_dump(mode="json"), **facts}

    def write(self, directory: Union[str, os.PathLike], **facts: Any) -> Path:
        """Echo the resolved configuration, plus run facts such as the seed
        actually used, next to a command's outputs."""
        path = Path(directory).joinpath(RESOLVED)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.resolved(**facts), f, indent=4)
        return path

    def _assign(self, keys: list[str], value: Any) -> None:
        if keys[0] not in self.__keys__:
            raise ConfigError(f"unknown configuration key '{keys[0]}'")
        node = self._data
        for key in keys[:-1]:
            node = node.setdefault(key, {})
            if not isinstance(node, dict):
                raise ConfigError(f"'{'.'.join(keys)}' descends into a non-object value")
        node[keys[-1]] = value

    def _validate(self) -> _Document:
        unknown = set(self._data) - set(self.__keys__)
        if unknown:
            raise ConfigError(f"unknown configuration keys {sorted(unknown)}")
        try:
            return _Document.model_validate(self._data)
        except pydantic.ValidationError as e:
            raise ConfigError(str(e)) from e

    def _load(self, path: Path) -> None:
        try:
            with open(path, "r", encoding="utf-8") as f:
                self._data = json.load(f)
        except FileNotFoundError as e:
            raise ConfigError(f"{path}: configuration file not found") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: not valid JSON ({e.msg} at line {e.lineno})") from e
        if not isinstance(self._data, dict):
            raise ConfigError(f"{path}: configuration must be a JSON object")
