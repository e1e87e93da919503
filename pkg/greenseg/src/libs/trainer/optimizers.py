from abc import ABC, abstractmethod

import numpy as np

from greenseg.src.libs.networks import ParamStore

try:
    from .enums import OptimizerKind
    from .exceptions import NumericFailure
    from .models import TrainConfig
except (ImportError, ModuleNotFoundError):
    from enums import OptimizerKind
    from exceptions import NumericFailure
    from models import TrainConfig


class Optimizer(ABC):
    """Updates the trainable parameters of a ParamStore in place from their
    `.grad`. Parameters without a gradient are left alone."""

    epsilon: float

    def __init__(self, epsilon: float = 1e-8) -> None:
        self.epsilon = epsilon

    def step(self, params: ParamStore, lr: float) -> None:
        """Apply one update.

        Raises:
            NumericFailure: a gradient holds NaN or inf; no parameter is changed
        """
        pending = [p for p in params.trainable() if p.grad is not None]
        for p in pending:
            if not np.isfinite(p.grad).all():
                raise NumericFailure(f"non-finite gradient in parameter {p.name}")
        params.step += 1
        for p in pending:
            slots = params.slots.setdefault(p.name, {})
            delta = self._delta(np.asarray(p.grad, dtype=np.float64), slots, params.step, lr)
            p.data = (p.data - delta).astype(p.data.dtype)

    @abstractmethod
    def _delta(self, grad: np.ndarray, slots: dict[str, np.ndarray], step: int, lr: float) -> np.ndarray:
        """Update `slots` and return the amount to subtract from the parameter."""


class Adam(Optimizer):

    def __init__(self, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8) -> None:
        super().__init__(epsilon)
        self.beta1 = beta1
        self.beta2 = beta2

    def _delta(self, grad, slots, step, lr):
        m = self.beta1 * slots.get("m", 0.0) + (1.0 - self.beta1) * grad
        v = self.beta2 * slots.get("v", 0.0) + (1.0 - self.beta2) * grad ** 2
        slots["m"], slots["v"] = m, v
        m_hat = m / (1.0 - self.beta1 ** step)
        v_hat = v / (1.0 - self.beta2 ** step)
        return lr * m_hat / (np.sqrt(v_hat) + self.epsilon)


class RMSprop(Optimizer):
    """Plain RMSprop, no momentum."""

    def __init__(self, rho: float = 0.9, epsilon: float = 1e-8) -> None:
        super().__init__(epsilon)
        self.rho = rho

    def _delta(self, grad, slots, step, lr):
        v = self.rho * slots.get("v", 0.0) + (1.0 - self.rho) * grad ** 2
        slots["v"] = v
        return lr * grad / np.sqrt(v + self.epsilon)


def create_optimizer(config: TrainConfig) -> Optimizer:
    match config.optimizer:
        case OptimizerKind.ADAM:
            return Adam(config.beta1, config.beta2, config.epsilon)
        case OptimizerKind.RMSPROP:
            return RMSprop(config.rho, config.epsilon)
        case _:
            raise ValueError(f"Unrecognized optimizer: {config.optimizer}")
