from collections.abc import Iterable, Iterator, Mapping
from typing import Optional

import numpy as np

from greenseg.src.libs.autodiff import ParamTensor

try:
    from .models import NetworkSpec, ParameterReport
except (ImportError, ModuleNotFoundError):
    from models import NetworkSpec, ParameterReport


class ParamStore(Mapping[str, ParamTensor]):
    """Name-sorted parameters plus optimizer slots keyed by the same names."""

    def __init__(self, params: Iterable[ParamTensor] = ()) -> None:
        self._params = {p.name: p for p in sorted(params, key=lambda p: p.name)}
        self.slots: dict[str, dict[str, np.ndarray]] = {}
        self.step = 0
        """optimizer steps taken"""

    def __getitem__(self, key: str) -> ParamTensor:
        return self._params[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def trainable(self) -> list[ParamTensor]:
        return [p for p in self._params.values() if p.trainable]

    def buffers(self) -> list[ParamTensor]:
        return [p for p in self._params.values() if not p.trainable]

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad = None

    def counts(self) -> tuple[int, int]:
        total = sum(p.data.size for p in self._params.values())
        return total, sum(p.data.size for p in self.trainable())

    def state(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self._params.items()}

    def load_state(self, state: Mapping[str, np.ndarray]) -> None:
        missing = set(self._params) ^ set(state)
        if missing:
            raise KeyError(f"parameter names differ: {sorted(missing)}")
        for name, value in state.items():
            self._params[name].assign(value)


def init_params(spec: NetworkSpec,
                rng: Optional[np.random.Generator] = None,
                dtype=np.float32) -> ParamStore:
    """He-normal convolution weights, zero biases, unit batch-norm scale and
    running variance."""
    rng = rng if rng is not None else np.random.default_rng(0)
    params = []
    for node in spec.nodes:
        for name, (shape, trainable) in sorted(node.param_shapes().items()):
            match name.rsplit(".", 1)[-1]:
                case "weight":
                    kh, kw = node.attrs["kernel"]
                    fan_in = node.attrs["cin"] * kh * kw
                    value = rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)
                case "gamma" | "running_var":
                    value = np.ones(shape)
                case _:
                    value = np.zeros(shape)
            params.append(ParamTensor(name, value.astype(dtype), trainable=trainable))
    return ParamStore(params)


def count_parameters(spec: NetworkSpec) -> tuple[int, int]:
    """(total, trainable); the difference is the batch-norm running statistics."""
    total = trainable = 0
    for shape, is_trainable in spec.param_shapes().values():
        size = int(np.prod(shape))
        total += size
        trainable += size if is_trainable else 0
    return total, trainable


def parameter_report(spec: NetworkSpec) -> ParameterReport:
    total, trainable = count_parameters(spec)
    published = spec.arch.published_parameters() if spec.arch is not None else (None, None)
    return ParameterReport(arch=spec.arch,
                           total=total,
                           trainable=trainable,
                           published_total=published[0],
                           published_trainable=published[1])
