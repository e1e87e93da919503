import csv
import os
from typing import Any, Optional, Union

import numpy as np
import pydantic

from greenseg.src.libs.networks import Architecture
from greenseg.src.libs.raster import AugmentConfig

try:
    from .enums import Decision, OptimizerKind
except (ImportError, ModuleNotFoundError):
    from enums import Decision, OptimizerKind


class TrainConfig(pydantic.BaseModel):
    """Optimisation settings. `preset` gives the reference settings of each
    architecture."""
    model_config = pydantic.ConfigDict(extra="forbid")

    arch: Architecture = Architecture.MODEL_B
    base_width: Optional[int] = None
    """None keeps the architecture default"""
    epochs: int = 250
    batch_size: int = 64
    optimizer: OptimizerKind = OptimizerKind.RMSPROP
    beta1: float = 0.9
    beta2: float = 0.999
    rho: float = 0.9
    epsilon: float = 1e-8
    base_lr: float = 1e-3
    warmup_steps: int = 5
    constant_lr: bool = False
    boost: float = 1.5
    """multiplier applied from the middle epoch on"""
    reduce_factor: float = 0.5
    reduce_patience: int = 75
    min_lr: float = 1e-5
    early_stop_patience: int = 125
    hem_rounds: int = 2
    hem_fraction: float = 0.2
    augmentation: Optional[AugmentConfig] = pydantic.Field(default_factory=AugmentConfig)
    """None trains on the tiles as stored"""
    seed: int = 0
    workers: int = 1

    @pydantic.field_validator("epochs", "batch_size", "warmup_steps", "reduce_patience",
                              "early_stop_patience", "workers")
    @classmethod
    def _positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("must be at least 1")
        return v

    @pydantic.field_validator("hem_fraction")
    @classmethod
    def _fraction(cls, v: float) -> float:
        if not 0.0 <= v <= 1.0:
            raise ValueError("must lie in [0, 1]")
        return v

    @classmethod
    def preset(cls, arch: Union[Architecture, str], **overrides: Any) -> "TrainConfig":
        arch = Architecture(arch)
        match arch:
            case Architecture.BASELINE:
                values = dict(epochs=125, batch_size=32, optimizer=OptimizerKind.ADAM,
                              base_lr=1e-4, constant_lr=True, reduce_patience=40,
                              early_stop_patience=80)
            case Architecture.MODEL_A:
                values = dict(epochs=250, batch_size=32, optimizer=OptimizerKind.ADAM)
            case Architecture.MODEL_B:
                values = dict(epochs=250, batch_size=64, optimizer=OptimizerKind.RMSPROP)
            case _:
                raise ValueError(f"Unrecognized architecture: {arch}")
        return cls(arch=arch, **{**values, **overrides})


class TrainState(pydantic.BaseModel):
    """Mutable bookkeeping of one training run. Optimizer moments live in
    the ParamStore slots."""

    epoch: int = 0
    base_lr: float
    """learning rate after plateau reductions, before the per-epoch factor"""
    best_f1: float = -1.0
    best_epoch: int = 0
    best_threshold: float = 0.5
    since_improvement: int = 0
    since_reduction: int = 0


class EpochRecord(pydantic.BaseModel):
    epoch: int
    train_loss: float
    val_loss: float
    train_f1: float
    val_f1: float
    val_threshold: float
    lr: float
    decision: Decision = Decision.CONTINUE
    hard_tiles: int = 0


class History(pydantic.BaseModel):
    records: list[EpochRecord] = pydantic.Field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, idx: int) -> EpochRecord:
        return self.records[idx]

    def append(self, record: EpochRecord) -> None:
        self.records.append(record)

    def column(self, name: str) -> list:
        return [getattr(r, name) for r in self.records]

    def to_csv(self, path: Union[str, os.PathLike]) -> None:
        fields = list(EpochRecord.model_fields)
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=fields)
            writer.writeheader()
            for r in self.records:
                writer.writerow(r.model_dump(mode="json"))


class TrainResult(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True)

    history: History
    state: TrainState
    best_params: dict[str, np.ndarray]
    """parameter values at the best validation epoch"""
