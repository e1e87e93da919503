from . import (batching, enums, exceptions, hem, loop, models, optimizers,
               schedule)
from .batching import infer_logits
from .enums import Decision, OptimizerKind
from .exceptions import NumericFailure
from .hem import hem_round
from .loop import Trainer, checkpoint_metadata, hem_epochs, train
from .models import EpochRecord, History, TrainConfig, TrainResult, TrainState
from .optimizers import Adam, Optimizer, RMSprop, create_optimizer
from .schedule import lr_at, plateau_and_stop

__all__ = [
    batching, enums, exceptions, hem, loop, models, optimizers, schedule,
]
