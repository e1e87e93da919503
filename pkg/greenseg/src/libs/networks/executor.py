import functools
from typing import Optional, Union

import numpy as np

from greenseg.src.libs import autodiff
from greenseg.src.libs.autodiff import Mode, Tensor

try:
    from .enums import OpKind
    from .models import INPUT, NetworkSpec, Node
    from .params import ParamStore, init_params
except (ImportError, ModuleNotFoundError):
    from enums import OpKind
    from models import INPUT, NetworkSpec, Node
    from params import ParamStore, init_params


class Network:
    """Executes a NetworkSpec against a ParamStore."""

    spec: NetworkSpec
    params: ParamStore

    def __init__(self,
                 spec: NetworkSpec,
                 params: Optional[ParamStore] = None,
                 seed: int = 0) -> None:
        self.spec = spec
        self.params = params if params is not None else init_params(
            spec, np.random.default_rng(seed))
        self._dropout_rng = np.random.default_rng(seed + 1)

    def __call__(self, x: Union[Tensor, np.ndarray], mode: Mode = Mode.INFER) -> Tensor:
        return self.forward(x, mode)

    def reseed(self, seed: int) -> None:
        """Reset the dropout stream, used per epoch for reproducible runs."""
        self._dropout_rng = np.random.default_rng(seed)

    def forward(self, x: Union[Tensor, np.ndarray], mode: Mode = Mode.INFER) -> Tensor:
        """Run the graph, returning logits of shape (n, 1, H, W)."""
        x = x if isinstance(x, Tensor) else Tensor(x)
        if x.ndim != 4 or x.shape[1] != self.spec.in_channels:
            raise autodiff.ContractViolation(
                f"network expects (n, {self.spec.in_channels}, H, W), got {x.shape}")
        edges: dict[str, Tensor] = {INPUT: x}
        for node in self.spec.nodes:
            edges[node.name] = self._apply(node, [edges[e] for e in node.inputs], Mode(mode))
        return edges[self.spec.output]

    def logits(self, x: np.ndarray) -> np.ndarray:
        """Inference-mode forward without recording a tape."""
        with autodiff.no_grad():
            return self.forward(np.asarray(x, dtype=np.float32), Mode.INFER).data

    def _apply(self, node: Node, inputs: list[Tensor], mode: Mode) -> Tensor:
        p = functools.partial(self._param, node)
        match node.op:
            case OpKind.CONV:
                return autodiff.conv2d(inputs[0], p("weight"), p("bias"),
                                       stride=node.attrs["stride"],
                                       pad=_pad(node.attrs["pad"]),
                                       dilation=node.attrs["dilation"])
            case OpKind.TRANSPOSED_CONV:
                return autodiff.transposed_conv2d(inputs[0], p("weight"), p("bias"),
                                                  stride=node.attrs["stride"])
            case OpKind.UPSAMPLE:
                return autodiff.bilinear_upsample2x(inputs[0])
            case OpKind.MAX_POOL:
                return autodiff.pool2d(inputs[0], autodiff.PoolKind.MAX, node.attrs["size"], node.attrs["size"])
            case OpKind.AVG_POOL:
                return autodiff.pool2d(inputs[0], autodiff.PoolKind.AVG, node.attrs["size"], node.attrs["size"])
            case OpKind.BATCH_NORM:
                return autodiff.batch_norm(inputs[0], p("gamma"), p("beta"),
                                           p("running_mean"), p("running_var"), mode)
            case OpKind.ACTIVATION:
                return autodiff.leaky_relu(inputs[0], node.attrs["slope"])
            case OpKind.DROPOUT:
                return autodiff.dropout(inputs[0], node.attrs["rate"], mode, self._dropout_rng)
            case OpKind.CONCAT:
                return autodiff.concat_channels(*inputs)
            case OpKind.ADD:
                return functools.reduce(autodiff.add, inputs)
            case _:
                raise ValueError(f"Unrecognized operation: {node.op}")

    def _param(self, node: Node, suffix: str):
        return self.params.get(f"{node.name}.{suffix}")


def _pad(pad):
    return pad if isinstance(pad, int) else tuple(pad)
