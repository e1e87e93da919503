import logging
from collections.abc import Sequence
from typing import Optional, Union

import numpy as np
from scipy import stats

try:
    from .exceptions import UndefinedMetric
    from .models import MetricsReport
except (ImportError, ModuleNotFoundError):
    from exceptions import UndefinedMetric
    from models import MetricsReport

THRESHOLDS = np.arange(50) / 49.0
"""candidate thresholds i/49 for i = 0..49"""

Maps = Union[np.ndarray, Sequence[np.ndarray]]


def _flatten(maps: Maps) -> np.ndarray:
    if isinstance(maps, np.ndarray):
        return maps.reshape(-1)
    return np.concatenate([np.asarray(m).reshape(-1) for m in maps])


def _pair(probs: Maps, masks: Maps) -> tuple[np.ndarray, np.ndarray]:
    p, y = _flatten(probs).astype(np.float64), _flatten(masks) > 0
    if p.shape != y.shape:
        raise ValueError(f"{p.size} probabilities against {y.size} mask pixels")
    return p, y


def confusion_counts(probs: Maps, masks: Maps, threshold: float = 0.5) -> tuple[int, int, int, int]:
    """(TP, FP, TN, FN) with a pixel predicted positive when prob >= threshold."""
    p, y = _pair(probs, masks)
    pred = p >= threshold
    tp = int(np.count_nonzero(pred & y))
    fp = int(np.count_nonzero(pred & ~y))
    fn = int(np.count_nonzero(~pred & y))
    return tp, fp, y.size - tp - fp - fn, fn


def confusion_metrics(probs: Maps, masks: Maps, threshold: float = 0.5) -> MetricsReport:
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold {threshold} outside [0, 1]")
    return MetricsReport.from_counts(*confusion_counts(probs, masks, threshold), threshold=threshold)


def roc_auc(probs: Maps, masks: Maps) -> float:
    """Area under the ROC curve as the normalized Mann-Whitney U statistic;
    tied scores count one half.

    Raises:
        UndefinedMetric: the mask holds only one class
    """
    p, y = _pair(probs, masks)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetric("AUC needs both positive and negative pixels")
    ranks = stats.rankdata(p)
    u = ranks[y].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def best_threshold(probs: Maps, masks: Maps) -> tuple[float, float]:
    """Grid threshold with the highest F1; the lowest one wins a tie."""
    p, y = _pair(probs, masks)
    best_t, best_f1 = float(THRESHOLDS[0]), -1.0
    for t in THRESHOLDS:
        f1 = MetricsReport.from_counts(*confusion_counts(p, y, t), threshold=float(t)).f1
        if f1 > best_f1:
            best_t, best_f1 = float(t), f1
    return best_t, best_f1


def evaluate(probs: Maps,
             masks: Maps,
             threshold: Optional[float] = None,
             best_epoch: Optional[int] = None) -> MetricsReport:
    """Global pixel-level report. Without a threshold the grid search picks one."""
    p, y = _pair(probs, masks)
    searched = None
    if threshold is None:
        threshold, _ = best_threshold(p, y)
        searched = threshold
    try:
        auc = roc_auc(p, y)
    except UndefinedMetric:
        logging.warning("AUC undefined: ground truth holds a single class")
        auc = None
    return MetricsReport.from_counts(*confusion_counts(p, y, threshold), threshold=threshold,
                                     auc=auc, best_threshold=searched, best_epoch=best_epoch)
