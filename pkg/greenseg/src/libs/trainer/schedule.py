import logging
import math
from typing import Optional

from greenseg.src.libs.autodiff import ContractViolation

try:
    from .enums import Decision
    from .models import TrainConfig, TrainState
except (ImportError, ModuleNotFoundError):
    from enums import Decision
    from models import TrainConfig, TrainState


def lr_at(epoch: int, config: TrainConfig, base_lr: Optional[float] = None) -> float:
    """Learning rate of a 1-indexed epoch.

    base * min(epoch^-0.5, epoch * warmup^-1.5), multiplied by the boost from
    epoch ceil(epochs / 2) on and floored at min_lr. `base_lr` is the
    plateau-adjusted base and defaults to the configured one. A constant
    schedule returns the base as is.
    """
    if epoch < 1:
        raise ContractViolation(f"epochs are counted from 1, got {epoch}")
    base = config.base_lr if base_lr is None else base_lr
    if config.constant_lr:
        return max(base, config.min_lr)
    factor = min(epoch ** -0.5, epoch * config.warmup_steps ** -1.5)
    if epoch >= math.ceil(config.epochs / 2):
        factor *= config.boost
    return max(base * factor, config.min_lr)


def plateau_and_stop(state: TrainState, val_f1: float, config: TrainConfig) -> Decision:
    """Update counters with this epoch's validation F1.

    A strictly higher F1 becomes the new best and resets both counters.
    Otherwise early stopping is checked first, then the plateau reduction,
    which halves (by `reduce_factor`) the base rate down to min_lr.
    """
    if val_f1 > state.best_f1:
        state.best_f1 = val_f1
        state.best_epoch = state.epoch
        state.since_improvement = 0
        state.since_reduction = 0
        return Decision.CONTINUE

    state.since_improvement += 1
    state.since_reduction += 1
    if state.since_improvement >= config.early_stop_patience:
        return Decision.STOP
    if state.since_reduction >= config.reduce_patience:
        state.since_reduction = 0
        reduced = max(state.base_lr * config.reduce_factor, config.min_lr)
        logging.info("Validation F1 flat for %d epochs, base learning rate %g -> %g",
                     config.reduce_patience, state.base_lr, reduced)
        state.base_lr = reduced
        return Decision.REDUCE_LR
    return Decision.CONTINUE
