from . import evaluation, exceptions, losses, models, weights
from .evaluation import (THRESHOLDS, best_threshold, confusion_counts,
                         confusion_metrics, evaluate, roc_auc)
from .exceptions import UndefinedMetric
from .losses import dice_loss, tile_losses, total_loss, weighted_bce
from .models import MetricsReport, WeightMap
from .weights import (border_distances, class_balance_map,
                      connected_components, unet_weight_map)

__all__ = [
    evaluation, exceptions, losses, models, weights,
]
