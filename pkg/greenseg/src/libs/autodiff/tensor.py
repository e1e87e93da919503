import contextlib
from typing import Callable, Iterator, Optional, Sequence, Union

import numpy as np

try:
    from .exceptions import ContractViolation
except (ImportError, ModuleNotFoundError):
    from exceptions import ContractViolation

Backward = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]
ArrayLike = Union[np.ndarray, float, int, Sequence]

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad() -> Iterator[None]:
    """Disable tape recording inside the block."""
    global _GRAD_ENABLED  # pylint: disable=global-statement
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


def grad_enabled() -> bool:
    return _GRAD_ENABLED


def _as_array(data: ArrayLike, dtype: Optional[np.dtype]) -> np.ndarray:
    if dtype is not None:
        return np.asarray(data, dtype=dtype)
    array = np.asarray(data)
    if np.issubdtype(array.dtype, np.floating):
        return array
    return array.astype(np.float32)


class Tensor:
    """Dense n-d array (NCHW for images) with an optional gradient buffer.

    Floating inputs keep their dtype so that float64 graphs can be built for
    gradient checking; anything else is promoted to float32.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self,
                 data: ArrayLike,
                 requires_grad: bool = False,
                 dtype: Optional[np.dtype] = None) -> None:
        self.data: np.ndarray = _as_array(data, dtype)
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self._parents: tuple["Tensor", ...] = ()
        self._backward: Optional[Backward] = None

    def __repr__(self) -> str:
        return (f"{self.__class__.__name__}(shape={self.shape}, "
                f"dtype={self.dtype}, requires_grad={self.requires_grad})")

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self) -> np.dtype:
        return self.data.dtype

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def is_leaf(self) -> bool:
        return self._backward is None

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Accumulate gradients of this tensor into every reachable leaf.

        Args:
            grad: seed gradient, defaults to ones for a single-element head

        Raises:
            ContractViolation: the head is not scalar and no seed is given
        """
        if grad is None:
            if self.data.size != 1:
                raise ContractViolation(
                    f"backward() without a seed needs a scalar, got shape {self.shape}")
            grad = np.ones_like(self.data)
        elif grad.shape != self.shape:
            raise ContractViolation(
                f"seed gradient shape {grad.shape} differs from tensor shape {self.shape}")

        pending = {id(self): grad}
        for node in reversed(self._topological_order()):
            node_grad = pending.pop(id(node), None)
            if node_grad is None:
                continue
            if node.is_leaf:
                if node.requires_grad:
                    node.grad = node_grad.copy() if node.grad is None else node.grad + node_grad
                continue
            for parent, parent_grad in zip(node._parents, node._backward(node_grad)):
                if parent_grad is None or not parent.requires_grad:
                    continue
                if id(parent) in pending:
                    pending[id(parent)] = pending[id(parent)] + parent_grad
                else:
                    pending[id(parent)] = parent_grad

    def _topological_order(self) -> list["Tensor"]:
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited and parent.requires_grad:
                    stack.append((parent, False))
        return order


class ParamTensor(Tensor):
    """Named model parameter. Non-trainable parameters are running buffers."""

    __slots__ = ("name", "trainable")

    def __init__(self,
                 name: str,
                 data: ArrayLike,
                 trainable: bool = True,
                 dtype: Optional[np.dtype] = None) -> None:
        super().__init__(data, requires_grad=trainable, dtype=dtype)
        self.name = name
        self.trainable = trainable

    def __repr__(self) -> str:
        return (f"ParamTensor(name={self.name!r}, shape={self.shape}, "
                f"trainable={self.trainable})")

    @property
    def value(self) -> np.ndarray:
        return self.data

    def assign(self, value: np.ndarray) -> None:
        if value.shape != self.data.shape:
            raise ContractViolation(
                f"{self.name}: cannot assign shape {value.shape} to {self.data.shape}")
        self.data = np.asarray(value, dtype=self.data.dtype).copy()


def record(data: np.ndarray,
           parents: Sequence[Tensor],
           backward: Backward) -> Tensor:
    """Wrap an operation result, registering it on the tape when any parent
    needs a gradient.

    Args:
        data: forward result
        parents: operands, in the order `backward` returns their gradients
        backward: maps the output gradient to one gradient (or None) per parent

    Returns:
        Tensor: the result
    """
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)  # pylint: disable=protected-access
        out._backward = backward  # pylint: disable=protected-access
    return out


def as_tensor(value: Union[Tensor, ArrayLike]) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)
