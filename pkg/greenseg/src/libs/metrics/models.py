import json
import os
from typing import Optional, Union

import numpy as np
import pydantic

W0 = 10.0
SIGMA = 5.0


class WeightMap(pydantic.BaseModel):
    """Per-pixel loss weights: class balance plus a border-separation term"""
    model_config = pydantic.ConfigDict(arbitrary_types_allowed=True)

    weights: np.ndarray
    class_balance: np.ndarray
    w0: float = W0
    sigma: float = SIGMA
    components: int = 0


class MetricsReport(pydantic.BaseModel):
    """Pixel-level binary segmentation scores at one threshold"""

    precision: float
    recall: float
    f1: float
    kappa: float
    iou: float
    accuracy: float
    auc: Optional[float] = None
    """None when the ground truth holds a single class"""
    threshold: float
    best_threshold: Optional[float] = None
    best_epoch: Optional[int] = None
    tp: int
    fp: int
    tn: int
    fn: int

    @classmethod
    def from_counts(cls, tp: int, fp: int, tn: int, fn: int, threshold: float, **extra) -> "MetricsReport":
        """Scores from confusion counts; every 0/0 ratio is reported as 0."""
        total = tp + fp + tn + fn
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        iou = tp / (tp + fp + fn) if tp + fp + fn else 0.0
        accuracy = (tp + tn) / total if total else 0.0
        chance = ((tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)) / total ** 2 if total else 1.0
        kappa = (accuracy - chance) / (1.0 - chance) if chance != 1.0 else 0.0
        return cls(precision=precision, recall=recall, f1=f1, kappa=kappa, iou=iou,
                   accuracy=accuracy, threshold=threshold,
                   tp=int(tp), fp=int(fp), tn=int(tn), fn=int(fn), **extra)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    def save(self, path: Union[str, os.PathLike]) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.model_dump(mode="json"), f, indent=4)

